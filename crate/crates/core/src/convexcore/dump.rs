//! Writer for the Conic Benchmark Format (CBF), so a program can be handed
//! to an external solver for cross-validation.

use std::io::{self, Write};

use clarabel::solver::SupportedConeT;

use super::backend::standard_form;
use super::program::ConicProgram;

/// Permutation taking CBF `SVECPSD` order (lower triangle, column-major) to
/// the backend's order (upper triangle, column-major).
fn svec_permutation(dim: usize) -> Vec<usize> {
    let mut perm = Vec::with_capacity(dim * (dim + 1) / 2);
    for j in 0..dim {
        for i in j..dim {
            // Lower entry (i, j) is upper entry (j, i).
            perm.push(i * (i + 1) / 2 + j);
        }
    }
    perm
}

fn cone_name(cone: &SupportedConeT<f64>, pow_index: &mut usize) -> (String, usize) {
    match cone {
        SupportedConeT::ZeroConeT(k) => ("L=".into(), *k),
        SupportedConeT::NonnegativeConeT(k) => ("L+".into(), *k),
        SupportedConeT::ExponentialConeT() => ("EXP".into(), 3),
        SupportedConeT::PowerConeT(_) => {
            let name = format!("@{}:POW", *pow_index);
            *pow_index += 1;
            (name, 3)
        }
        SupportedConeT::PSDTriangleConeT(d) => ("SVECPSD".into(), d * (d + 1) / 2),
        other => panic!("cone {other:?} is never produced by ConicProgram"),
    }
}

/// Writes `prog` in CBF. Rows are `(-A) x + b` in the cone, with exponential
/// cone members reversed to CBF's `x0 >= x1 exp(x2 / x1)` ordering.
pub fn write_cbf<W: Write>(prog: &ConicProgram, out: &mut W) -> io::Result<()> {
    let sf = standard_form(prog);
    let has_psd = sf
        .cones
        .iter()
        .any(|c| matches!(c, SupportedConeT::PSDTriangleConeT(_)));
    writeln!(out, "VER\n{}\n", if has_psd { 4 } else { 3 })?;
    writeln!(out, "OBJSENSE\nMIN\n")?;

    let alphas: Vec<f64> = sf
        .cones
        .iter()
        .filter_map(|c| match c {
            SupportedConeT::PowerConeT(a) => Some(*a),
            _ => None,
        })
        .collect();
    if !alphas.is_empty() {
        writeln!(out, "POWCONES\n{} {}", alphas.len(), 2 * alphas.len())?;
        for a in &alphas {
            writeln!(out, "2\n{a:e}\n{:e}", 1.0 - a)?;
        }
        writeln!(out)?;
    }

    writeln!(out, "VAR\n{} 1\nF {}\n", sf.n, sf.n)?;

    // Row permutation from backend order to CBF order.
    let mut row_map = vec![0usize; sf.b.len()];
    let mut offset = 0;
    let mut pow_index = 0;
    let mut cone_lines = Vec::new();
    for cone in &sf.cones {
        let (name, size) = cone_name(cone, &mut pow_index);
        match cone {
            SupportedConeT::ExponentialConeT() => {
                for (k, slot) in [2, 1, 0].iter().enumerate() {
                    row_map[offset + slot] = offset + k;
                }
            }
            SupportedConeT::PSDTriangleConeT(d) => {
                for (k, src) in svec_permutation(*d).into_iter().enumerate() {
                    row_map[offset + src] = offset + k;
                }
            }
            _ => {
                for r in 0..size {
                    row_map[offset + r] = offset + r;
                }
            }
        }
        cone_lines.push(format!("{name} {size}"));
        offset += size;
    }
    writeln!(out, "CON\n{} {}", sf.b.len(), cone_lines.len())?;
    for line in &cone_lines {
        writeln!(out, "{line}")?;
    }
    writeln!(out)?;

    let obj: Vec<(usize, f64)> = sf
        .q
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(j, v)| (j, *v))
        .collect();
    writeln!(out, "OBJACOORD\n{}", obj.len())?;
    for (j, v) in obj {
        writeln!(out, "{j} {v:e}")?;
    }
    writeln!(out)?;
    if sf.q0 != 0.0 {
        writeln!(out, "OBJBCOORD\n{:e}\n", sf.q0)?;
    }

    let a: Vec<_> = sf.a.iter().filter(|t| t.2 != 0.0).collect();
    writeln!(out, "ACOORD\n{}", a.len())?;
    for &&(r, c, v) in &a {
        writeln!(out, "{} {c} {:e}", row_map[r], -v)?;
    }
    writeln!(out)?;
    let b: Vec<_> = sf.b.iter().enumerate().filter(|(_, v)| **v != 0.0).collect();
    writeln!(out, "BCOORD\n{}", b.len())?;
    for (r, v) in b {
        writeln!(out, "{} {v:e}", row_map[r])?;
    }
    Ok(())
}
