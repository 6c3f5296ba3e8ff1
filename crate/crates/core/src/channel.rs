//! One frozen realization of every channel in the network.
//!
//! Subcarrier indices are zero-based in storage; the per-subcarrier phase
//! terms use the one-based index `n + 1`. Metasurface elements are laid out
//! as `mr * Mc + mc` (row-major over rows, columns inner), the order the
//! Kronecker product of the row and column steering vectors produces.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::scenario::{stream, SeededStreams, SystemParams, Topology, SPEED_OF_LIGHT};

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Draws one circularly-symmetric standard complex normal sample.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn phase(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, theta)
}

/// Per-subcarrier delay phase `exp(-j 2 pi n W d / c)` with one-based `n`.
fn delay_phase(params: &SystemParams, n: usize, distance: f64) -> Complex64 {
    phase(-2.0 * PI * (n as f64 + 1.0) * params.w * distance / SPEED_OF_LIGHT)
}

#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// `K x N` task node to relay gains.
    pub h_r: DMatrix<Complex64>,
    /// Relay to metasurface, one `M`-vector per subcarrier.
    pub g: Vec<CVector>,
    /// Metasurface to feed antenna, one `M`-vector per subcarrier.
    pub h_f: Vec<CVector>,
    /// Cascade vectors with `v_n^H = h_n^H diag(g_n)`.
    pub v: Vec<CVector>,
    /// `V_n = v_n v_n^H`.
    pub big_v: Vec<CMatrix>,
}

/// Rician task node to relay gain for user `k` on subcarrier `n`.
pub fn tn_relay_channel(
    params: &SystemParams,
    topo: &Topology,
    k: usize,
    n: usize,
    streams: &SeededStreams,
) -> Complex64 {
    let mut rng = streams.stream(stream::TN_RELAY, k as u64, n as u64);
    let nlos = complex_normal(&mut rng);
    rician_scalar(params.c0, topo.d_k[k], params.nu, params.kappa1, delay_phase(params, n, topo.d_k[k]), nlos)
}

pub(crate) fn rician_scalar(
    c0: f64,
    distance: f64,
    exponent: f64,
    kappa: f64,
    los: Complex64,
    nlos: Complex64,
) -> Complex64 {
    let path = (c0 / distance.powf(exponent)).sqrt();
    if kappa.is_infinite() {
        return los * path;
    }
    let w_los = (kappa / (1.0 + kappa)).sqrt();
    let w_nlos = (1.0 / (1.0 + kappa)).sqrt();
    (los * w_los + nlos * w_nlos) * path
}

/// Far-field planar-array response: row factor (spacing `dr`, angle factor
/// `sin(phi) cos(psi)`) Kronecker column factor (spacing `dc`, angle factor
/// `sin(phi) sin(psi)`).
pub fn upa_los_steering(params: &SystemParams, phi: f64, psi: f64) -> CVector {
    let k0 = 2.0 * PI * params.f_c / SPEED_OF_LIGHT;
    let row_step = params.dr * phi.sin() * psi.cos();
    let col_step = params.dc * phi.sin() * psi.sin();
    let row: Vec<Complex64> = (0..params.mr)
        .map(|i| phase(-k0 * i as f64 * row_step))
        .collect();
    let col: Vec<Complex64> = (0..params.mc)
        .map(|i| phase(-k0 * i as f64 * col_step))
        .collect();
    CVector::from_iterator(
        params.m(),
        row.iter().flat_map(|r| col.iter().map(move |c| r * c)),
    )
}

/// Rician relay to metasurface vector on subcarrier `n`.
pub fn relay_rms_channel(
    params: &SystemParams,
    topo: &Topology,
    n: usize,
    streams: &SeededStreams,
) -> CVector {
    let los = upa_los_steering(params, topo.aoa_phi, topo.aoa_psi);
    let mut rng = streams.stream(stream::RELAY_RMS, n as u64, 0);
    let shift = delay_phase(params, n, topo.d_relay_rms);
    CVector::from_iterator(
        params.m(),
        los.iter().map(|&l| {
            let nlos = complex_normal(&mut rng);
            rician_scalar(
                params.c0,
                topo.d_relay_rms,
                params.alpha_pl,
                params.kappa2,
                shift * l,
                nlos,
            )
        }),
    )
}

/// Grid offset `(2 m - M - 1) / 2` of one-based index `m` in a line of `count`.
pub fn grid_offset(m: usize, count: usize) -> f64 {
    (2.0 * m as f64 - count as f64 - 1.0) / 2.0
}

/// Element-to-feed distances in storage order.
pub fn nearfield_distances(params: &SystemParams, r_hat: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(params.m());
    for mr in 1..=params.mr {
        for mc in 1..=params.mc {
            let dx = grid_offset(mc, params.mc) * params.dc;
            let dy = grid_offset(mr, params.mr) * params.dr;
            out.push((r_hat * r_hat + dx * dx + dy * dy).sqrt());
        }
    }
    out
}

/// Near-field line-of-sight metasurface to feed vector on subcarrier `n`.
pub fn rms_feed_channel(params: &SystemParams, r_hat: f64, n: usize) -> CVector {
    let k0 = 2.0 * PI * params.f_c / SPEED_OF_LIGHT;
    let common = delay_phase(params, n, r_hat) * params.rho;
    let r = nearfield_distances(params, r_hat);
    CVector::from_iterator(
        params.m(),
        r.iter().map(|&rm| common * phase(k0 * (rm - r_hat))),
    )
}

/// Cascade `v` with `v^H = h^H diag(g)`, i.e. `v_m = conj(g_m) h_m`.
pub fn cascade(h_f: &CVector, g: &CVector) -> CVector {
    h_f.zip_map(g, |h, g| g.conj() * h)
}

pub fn build_channel_set(
    params: &SystemParams,
    topo: &Topology,
    streams: &SeededStreams,
) -> ChannelSet {
    let h_r = DMatrix::from_fn(params.k, params.n, |k, n| {
        tn_relay_channel(params, topo, k, n, streams)
    });
    let g: Vec<CVector> = (0..params.n)
        .map(|n| relay_rms_channel(params, topo, n, streams))
        .collect();
    let h_f: Vec<CVector> = (0..params.n)
        .map(|n| rms_feed_channel(params, topo.r_hat, n))
        .collect();
    ChannelSet::from_parts(h_r, g, h_f)
}

impl ChannelSet {
    pub fn from_parts(h_r: DMatrix<Complex64>, g: Vec<CVector>, h_f: Vec<CVector>) -> Self {
        let v: Vec<CVector> = h_f.iter().zip(&g).map(|(h, g)| cascade(h, g)).collect();
        let big_v = v.iter().map(|v| v * v.adjoint()).collect();
        Self {
            h_r,
            g,
            h_f,
            v,
            big_v,
        }
    }

    pub fn k(&self) -> usize {
        self.h_r.nrows()
    }

    pub fn n(&self) -> usize {
        self.h_r.ncols()
    }

    pub fn m(&self) -> usize {
        self.v.first().map_or(0, |v| v.len())
    }

    /// `|h^r_{k,n}|^2`.
    pub fn relay_gain2(&self, k: usize, n: usize) -> f64 {
        self.h_r[(k, n)].norm_sqr()
    }

    /// `|v_n^H s|^2`.
    pub fn cascade_gain2(&self, n: usize, s: &CVector) -> f64 {
        self.v[n].dotc(s).norm_sqr()
    }

    /// `tr(S V_n) = v_n^H S v_n`.
    pub fn cascade_gain2_cov(&self, n: usize, s: &CMatrix) -> f64 {
        let v = &self.v[n];
        v.dotc(&(s * v)).re
    }

    /// Same realization with every task node to relay gain set to zero.
    pub fn with_relay_zeroed(&self) -> Self {
        let mut out = self.clone();
        out.h_r.fill(Complex64::new(0.0, 0.0));
        out
    }

    /// Same realization with the relay to metasurface cascade removed.
    pub fn with_cascade_zeroed(&self) -> Self {
        let g = self.g.iter().map(|g| g.map(|_| Complex64::new(0.0, 0.0))).collect();
        Self::from_parts(self.h_r.clone(), g, self.h_f.clone())
    }

    /// Writes every complex entry as `group,k,n,m,re,im` rows.
    pub fn dump<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["group", "k", "n", "m", "re", "im"])?;
        for k in 0..self.k() {
            for n in 0..self.n() {
                let h = self.h_r[(k, n)];
                w.write_record(&[
                    "h_r".to_string(),
                    k.to_string(),
                    n.to_string(),
                    String::new(),
                    format!("{:e}", h.re),
                    format!("{:e}", h.im),
                ])?;
            }
        }
        for (group, vecs) in [("g", &self.g), ("h_f", &self.h_f), ("v", &self.v)] {
            for (n, vec) in vecs.iter().enumerate() {
                for (m, x) in vec.iter().enumerate() {
                    w.write_record(&[
                        group.to_string(),
                        String::new(),
                        n.to_string(),
                        m.to_string(),
                        format!("{:e}", x.re),
                        format!("{:e}", x.im),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}
