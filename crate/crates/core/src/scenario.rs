//! Scenario configuration, physical layout and reproducible randomness.
//!
//! Every quantity stored in [`SystemParams`] is in SI linear units. Decibel
//! values are converted exactly once, when a config document is loaded.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub type Point3 = [f64; 3];

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("failed to parse config: {0}")]
    Parse(String),
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}` has the wrong type (expected {expected})")]
    WrongType { key: String, expected: &'static str },
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

/// Scalar constants of one scenario plus node geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Number of task nodes.
    pub k: usize,
    /// Number of subcarriers.
    pub n: usize,
    /// Metasurface element columns.
    pub mc: usize,
    /// Metasurface element rows.
    pub mr: usize,
    /// Per-subcarrier bandwidth, Hz.
    pub w: f64,
    /// Time duration, s.
    pub t: f64,
    /// Relay noise power, W.
    pub sigma2: f64,
    /// Feed-antenna noise power, W.
    pub delta2: f64,
    pub c_t: f64,
    pub c_r: f64,
    pub c_m: f64,
    pub alpha_t: f64,
    pub alpha_r: f64,
    pub p_t_max: f64,
    pub p_r_max: f64,
    pub f_t_max: f64,
    pub f_r_max: f64,
    pub f_m_max: f64,
    /// Carrier frequency, Hz.
    pub f_c: f64,
    /// Path-loss exponent, task node to relay.
    pub nu: f64,
    /// Path-loss exponent, relay to metasurface.
    pub alpha_pl: f64,
    /// Path gain at 1 m, linear.
    pub c0: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub rms_pos: Point3,
    pub relay_pos: Point3,
    pub user_center: Point3,
    pub user_radius: f64,
    /// Distance from the metasurface center to the feed antenna, m.
    pub feed_distance: f64,
    /// Element column spacing, m.
    pub dc: f64,
    /// Element row spacing, m.
    pub dr: f64,
    /// Near-field gain magnitude.
    pub rho: f64,
    /// Demanded task bits per user.
    pub d: Vec<f64>,
    pub epsilon: f64,
    pub epsilon_rank: f64,
    pub seed: u64,
}

impl SystemParams {
    pub fn m(&self) -> usize {
        self.mc * self.mr
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.f_c
    }

    /// Largest number of bits a task node can compute by itself within `T`.
    pub fn local_capacity(&self) -> f64 {
        self.t * self.f_t_max / self.c_t
    }

    /// Returns a copy with every user demanding `bits`.
    pub fn with_uniform_demand(&self, bits: f64) -> Self {
        let mut p = self.clone();
        p.d = vec![bits; p.k];
        p
    }

    /// Returns a copy with a square `side × side` metasurface.
    pub fn with_square_surface(&self, m: usize) -> Result<Self, ConfigError> {
        let (mc, mr) = grid_for(m)?;
        let mut p = self.clone();
        p.mc = mc;
        p.mr = mr;
        Ok(p)
    }

    /// Returns a copy with `k` users, keeping the per-user demand of user 0.
    pub fn with_users(&self, k: usize) -> Self {
        let mut p = self.clone();
        let bits = self.d.first().copied().unwrap_or(0.0);
        p.k = k;
        p.d = vec![bits; k];
        p
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::Invalid {
                    key: key.to_string(),
                    reason: format!("must be finite and > 0, got {v}"),
                })
            }
        }
        if self.k == 0 {
            return Err(invalid("K", "must be >= 1"));
        }
        if self.n == 0 {
            return Err(invalid("N", "must be >= 1"));
        }
        if self.mc == 0 || self.mr == 0 {
            return Err(invalid("M", "element grid must be non-empty"));
        }
        for (key, v) in [
            ("W", self.w),
            ("T", self.t),
            ("sigma2", self.sigma2),
            ("delta2", self.delta2),
            ("c_t", self.c_t),
            ("c_r", self.c_r),
            ("c_m", self.c_m),
            ("alpha_t", self.alpha_t),
            ("alpha_r", self.alpha_r),
            ("p_t_max", self.p_t_max),
            ("p_r_max", self.p_r_max),
            ("f_t_max", self.f_t_max),
            ("f_r_max", self.f_r_max),
            ("f_m_max", self.f_m_max),
            ("f_c", self.f_c),
            ("nu", self.nu),
            ("alpha_pl", self.alpha_pl),
            ("c0", self.c0),
            ("kappa1", self.kappa1),
            ("kappa2", self.kappa2),
            ("user_radius", self.user_radius),
            ("feed_distance", self.feed_distance),
            ("dc", self.dc),
            ("dr", self.dr),
            ("rho", self.rho),
            ("epsilon", self.epsilon),
            ("epsilon_rank", self.epsilon_rank),
        ] {
            positive(key, v)?;
        }
        if self.d.len() != self.k {
            return Err(invalid(
                "D",
                &format!("expected {} entries, got {}", self.k, self.d.len()),
            ));
        }
        for &bits in &self.d {
            positive("D", bits)?;
        }
        if dist(&self.rms_pos, &self.relay_pos) <= 0.0 {
            return Err(invalid("relay_pos", "relay and metasurface coincide"));
        }
        Ok(())
    }
}

fn invalid(key: &str, reason: &str) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        reason: reason.to_string(),
    }
}

/// `x_dB -> linear`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `x_dBm -> W`.
pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn watt_to_dbm(w: f64) -> f64 {
    10.0 * (w / 1e-3).log10()
}

/// Splits `m` elements into a `(columns, rows)` grid with `columns = ceil(sqrt(m))`.
pub fn grid_for(m: usize) -> Result<(usize, usize), ConfigError> {
    if m == 0 {
        return Err(invalid("M", "must be >= 1"));
    }
    let side = (m as f64).sqrt().ceil() as usize;
    if side * side != m {
        return Err(invalid(
            "M",
            &format!("{m} is not a square; give Mc and Mr explicitly"),
        ));
    }
    Ok((side, side))
}

/// The parameter set of the reference simulation setup.
pub fn default_paper_params() -> SystemParams {
    let k = 5;
    let f_c = 3e9;
    let half_wavelength = SPEED_OF_LIGHT / (2.0 * f_c);
    SystemParams {
        k,
        n: 20,
        mc: 5,
        mr: 5,
        w: 1e6,
        t: 1.0,
        sigma2: dbm_to_watt(-70.0),
        delta2: dbm_to_watt(-70.0),
        c_t: 1e3,
        c_r: 1e3,
        c_m: 1e3,
        alpha_t: 1e-27,
        alpha_r: 0.3e-27,
        p_t_max: dbm_to_watt(40.0),
        p_r_max: dbm_to_watt(40.0),
        f_t_max: 2e9,
        f_r_max: 3e9,
        f_m_max: 5e9,
        f_c,
        nu: 3.0,
        alpha_pl: 3.0,
        c0: db_to_linear(-30.0),
        kappa1: db_to_linear(3.0),
        kappa2: db_to_linear(3.0),
        rms_pos: [0.0, 0.0, 10.0],
        relay_pos: [25.0, 25.0, 10.0],
        user_center: [0.0, 0.0, 0.0],
        user_radius: 50.0,
        feed_distance: 1.0,
        dc: half_wavelength,
        dr: half_wavelength,
        rho: 1.0,
        d: vec![1e6; k],
        epsilon: 1e-3,
        epsilon_rank: 1e-3,
        seed: 1,
    }
}

/// Parses a flat TOML scenario document.
///
/// Keys mirror the [`SystemParams`] field names (`K`, `N`, `M` or `Mc`/`Mr`,
/// `W`, `T`, ...). The decibel forms `sigma2_dbm`, `delta2_dbm`, `c0_db`,
/// `kappa_db` (or `kappa1_db`/`kappa2_db`), `p_max_dbm` (or
/// `p_t_max_dbm`/`p_r_max_dbm`) are accepted and converted here. `D` may be a
/// scalar (uniform demand) or an array of length `K`.
///
/// With `preset = "reference"` any key not given falls back to
/// [`default_paper_params`]; otherwise every parameter without a documented
/// default must be present.
pub fn load_params(config_text: &str) -> Result<SystemParams, ConfigError> {
    let table: toml::Table = config_text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.message().to_string()))?;
    let mut reader = KeyReader::new(table);
    let preset = reader.string("preset")?;
    let base = match preset.as_deref() {
        None => None,
        Some("reference") => Some(default_paper_params()),
        Some(other) => {
            return Err(invalid("preset", &format!("unknown preset `{other}`")));
        }
    };
    let p = build_params(&mut reader, base.as_ref())?;
    reader.finish()?;
    p.validate()?;
    Ok(p)
}

/// Non-parameter keys that may appear in a scenario document; they are
/// consumed by [`crate::solvers::BcdSettings::from_config`].
pub const SETTINGS_KEYS: &[&str] = &[
    "max_outer",
    "sca_max_iters",
    "sca_tol",
    "dc_max_iters",
    "defer_rounding",
];

fn build_params(
    r: &mut KeyReader,
    base: Option<&SystemParams>,
) -> Result<SystemParams, ConfigError> {
    macro_rules! req {
        ($v:expr, $key:expr, $field:ident) => {
            match ($v, base) {
                (Some(v), _) => v,
                (None, Some(b)) => b.$field.clone(),
                (None, None) => return Err(ConfigError::MissingKey($key.to_string())),
            }
        };
    }
    let k = req!(r.usize("K")?, "K", k);
    let n = req!(r.usize("N")?, "N", n);
    let m = r.usize("M")?;
    let mc_raw = r.usize("Mc")?;
    let mr_raw = r.usize("Mr")?;
    let (mc, mr) = match (m, mc_raw, mr_raw) {
        (_, Some(mc), Some(mr)) => {
            if let Some(m) = m {
                if mc * mr != m {
                    return Err(invalid("M", &format!("Mc*Mr = {} but M = {m}", mc * mr)));
                }
            }
            (mc, mr)
        }
        (Some(m), None, None) => grid_for(m)?,
        (None, None, None) => match base {
            Some(b) => (b.mc, b.mr),
            None => return Err(ConfigError::MissingKey("M".into())),
        },
        _ => return Err(invalid("Mc", "Mc and Mr must be given together")),
    };
    let w = req!(r.f64("W")?, "W", w);
    let t = req!(r.f64("T")?, "T", t);
    let sigma2 = req!(
        r.power("sigma2", "sigma2_dbm")?,
        "sigma2",
        sigma2
    );
    // Defaults to the relay noise when not given.
    let delta2 = match r.power("delta2", "delta2_dbm")? {
        Some(v) => v,
        None => base.map(|b| b.delta2).unwrap_or(sigma2),
    };
    let c_t = req!(r.f64("c_t")?, "c_t", c_t);
    let c_r = req!(r.f64("c_r")?, "c_r", c_r);
    let c_m = req!(r.f64("c_m")?, "c_m", c_m);
    let alpha_t = req!(r.f64("alpha_t")?, "alpha_t", alpha_t);
    let alpha_r = req!(r.f64("alpha_r")?, "alpha_r", alpha_r);
    let p_both = r.dbm("p_max_dbm")?;
    let p_t_max = req!(
        r.power("p_t_max", "p_t_max_dbm")?.or(p_both),
        "p_t_max",
        p_t_max
    );
    let p_r_max = req!(
        r.power("p_r_max", "p_r_max_dbm")?.or(p_both),
        "p_r_max",
        p_r_max
    );
    let f_t_max = req!(r.f64("f_t_max")?, "f_t_max", f_t_max);
    let f_r_max = req!(r.f64("f_r_max")?, "f_r_max", f_r_max);
    let f_m_max = req!(r.f64("f_m_max")?, "f_m_max", f_m_max);
    let f_c = req!(r.f64("f_c")?, "f_c", f_c);
    let nu = req!(r.f64("nu")?, "nu", nu);
    let alpha_pl = req!(r.f64("alpha_pl")?, "alpha_pl", alpha_pl);
    let c0 = req!(r.gain("c0", "c0_db")?, "c0", c0);
    let kappa_both = r.db("kappa_db")?;
    let kappa1 = req!(
        r.gain("kappa1", "kappa1_db")?.or(kappa_both),
        "kappa1",
        kappa1
    );
    let kappa2 = req!(
        r.gain("kappa2", "kappa2_db")?.or(kappa_both),
        "kappa2",
        kappa2
    );
    let rms_pos = r.point("rms_pos")?.or(base.map(|b| b.rms_pos)).unwrap_or([0.0, 0.0, 10.0]);
    let relay_pos = r
        .point("relay_pos")?
        .or(base.map(|b| b.relay_pos))
        .unwrap_or([25.0, 25.0, 10.0]);
    let user_center = r
        .point("user_center")?
        .or(base.map(|b| b.user_center))
        .unwrap_or([0.0, 0.0, 0.0]);
    let user_radius = req!(r.f64("user_radius")?, "user_radius", user_radius);
    let half_wavelength = SPEED_OF_LIGHT / (2.0 * f_c);
    let feed_distance = r
        .f64("feed_distance")?
        .or(base.map(|b| b.feed_distance))
        .unwrap_or(1.0);
    let dc = r.f64("dc")?.unwrap_or(half_wavelength);
    let dr = r.f64("dr")?.unwrap_or(half_wavelength);
    let rho = r.f64("rho")?.or(base.map(|b| b.rho)).unwrap_or(1.0);
    let d = match r.demand("D", k)? {
        Some(d) => d,
        None => match base {
            Some(b) => vec![b.d.first().copied().unwrap_or(1e6); k],
            None => return Err(ConfigError::MissingKey("D".into())),
        },
    };
    let epsilon = req!(r.f64("epsilon")?, "epsilon", epsilon);
    let epsilon_rank = r
        .f64("epsilon_rank")?
        .or(base.map(|b| b.epsilon_rank))
        .unwrap_or(1e-3);
    let seed = r.u64("seed")?.or(base.map(|b| b.seed)).unwrap_or(1);
    Ok(SystemParams {
        k,
        n,
        mc,
        mr,
        w,
        t,
        sigma2,
        delta2,
        c_t,
        c_r,
        c_m,
        alpha_t,
        alpha_r,
        p_t_max,
        p_r_max,
        f_t_max,
        f_r_max,
        f_m_max,
        f_c,
        nu,
        alpha_pl,
        c0,
        kappa1,
        kappa2,
        rms_pos,
        relay_pos,
        user_center,
        user_radius,
        feed_distance,
        dc,
        dr,
        rho,
        d,
        epsilon,
        epsilon_rank,
        seed,
    })
}

/// Pulls typed values out of a TOML table and remembers which keys were used.
pub(crate) struct KeyReader {
    table: toml::Table,
}

impl KeyReader {
    pub(crate) fn new(table: toml::Table) -> Self {
        Self { table }
    }

    fn take(&mut self, key: &str) -> Option<toml::Value> {
        self.table.remove(key)
    }

    pub(crate) fn f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(toml::Value::Float(v)) => Ok(Some(v)),
            Some(toml::Value::Integer(v)) => Ok(Some(v as f64)),
            Some(_) => Err(ConfigError::WrongType {
                key: key.into(),
                expected: "number",
            }),
        }
    }

    pub(crate) fn u64(&mut self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(toml::Value::Integer(v)) if v >= 0 => Ok(Some(v as u64)),
            Some(_) => Err(ConfigError::WrongType {
                key: key.into(),
                expected: "non-negative integer",
            }),
        }
    }

    pub(crate) fn usize(&mut self, key: &str) -> Result<Option<usize>, ConfigError> {
        Ok(self.u64(key)?.map(|v| v as usize))
    }

    pub(crate) fn bool(&mut self, key: &str) -> Result<Option<bool>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(toml::Value::Boolean(v)) => Ok(Some(v)),
            Some(_) => Err(ConfigError::WrongType {
                key: key.into(),
                expected: "boolean",
            }),
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<String>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(ConfigError::WrongType {
                key: key.into(),
                expected: "string",
            }),
        }
    }

    fn db(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        Ok(self.f64(key)?.map(db_to_linear))
    }

    fn dbm(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        Ok(self.f64(key)?.map(dbm_to_watt))
    }

    /// A power given either in W under `key` or in dBm under `dbm_key`.
    fn power(&mut self, key: &str, dbm_key: &str) -> Result<Option<f64>, ConfigError> {
        let lin = self.f64(key)?;
        let log = self.dbm(dbm_key)?;
        match (lin, log) {
            (Some(_), Some(_)) => Err(invalid(key, &format!("both `{key}` and `{dbm_key}` given"))),
            (a, b) => Ok(a.or(b)),
        }
    }

    fn gain(&mut self, key: &str, db_key: &str) -> Result<Option<f64>, ConfigError> {
        let lin = self.f64(key)?;
        let log = self.db(db_key)?;
        match (lin, log) {
            (Some(_), Some(_)) => Err(invalid(key, &format!("both `{key}` and `{db_key}` given"))),
            (a, b) => Ok(a.or(b)),
        }
    }

    fn point(&mut self, key: &str) -> Result<Option<Point3>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(toml::Value::Array(items)) if items.len() == 3 => {
                let mut out = [0.0; 3];
                for (slot, item) in out.iter_mut().zip(items) {
                    *slot = match item {
                        toml::Value::Float(v) => v,
                        toml::Value::Integer(v) => v as f64,
                        _ => {
                            return Err(ConfigError::WrongType {
                                key: key.into(),
                                expected: "array of 3 numbers",
                            })
                        }
                    };
                }
                Ok(Some(out))
            }
            Some(_) => Err(ConfigError::WrongType {
                key: key.into(),
                expected: "array of 3 numbers",
            }),
        }
    }

    fn demand(&mut self, key: &str, k: usize) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(toml::Value::Float(v)) => Ok(Some(vec![v; k])),
            Some(toml::Value::Integer(v)) => Ok(Some(vec![v as f64; k])),
            Some(toml::Value::Array(items)) => items
                .into_iter()
                .map(|item| match item {
                    toml::Value::Float(v) => Ok(v),
                    toml::Value::Integer(v) => Ok(v as f64),
                    _ => Err(ConfigError::WrongType {
                        key: key.into(),
                        expected: "number or array of numbers",
                    }),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(_) => Err(ConfigError::WrongType {
                key: key.into(),
                expected: "number or array of numbers",
            }),
        }
    }

    /// Errors on the first key nobody asked for.
    pub(crate) fn finish(self) -> Result<(), ConfigError> {
        match self
            .table
            .keys()
            .find(|k| !SETTINGS_KEYS.contains(&k.as_str()))
        {
            Some(k) => Err(ConfigError::UnknownKey(k.clone())),
            None => Ok(()),
        }
    }
}

/// Node placement for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Topology {
    pub user_positions: Vec<Point3>,
    /// Task node to relay distances, m.
    pub d_k: Vec<f64>,
    pub d_relay_rms: f64,
    /// Metasurface center to feed antenna distance, m.
    pub r_hat: f64,
    /// Vertical angle of arrival at the metasurface, rad.
    pub aoa_phi: f64,
    /// Horizontal angle of arrival at the metasurface, rad.
    pub aoa_psi: f64,
}

pub fn dist(a: &Point3, b: &Point3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Stream tags for [`SeededStreams`].
pub mod stream {
    pub const TOPOLOGY: u64 = 1;
    pub const TN_RELAY: u64 = 2;
    pub const RELAY_RMS: u64 = 3;
    pub const INIT_PHASE: u64 = 4;
    pub const SDR_RANDOMIZATION: u64 = 6;
}

/// Counter-style random streams: each `(tag, a, b)` triple addresses an
/// independent ChaCha stream, so draws do not depend on evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeededStreams {
    pub seed: u64,
}

impl SeededStreams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn stream(&self, tag: u64, a: u64, b: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((tag << 56) ^ ((a & 0x0fff_ffff) << 28) ^ (b & 0x0fff_ffff));
        rng
    }
}

/// Places the users uniformly in the configured disc and derives all
/// distances and arrival angles.
pub fn generate_topology(params: &SystemParams) -> Topology {
    let mut rng = SeededStreams::new(params.seed).stream(stream::TOPOLOGY, 0, 0);
    let user_positions: Vec<Point3> = (0..params.k)
        .map(|_| {
            let r = params.user_radius * rng.random::<f64>().sqrt();
            let theta = 2.0 * PI * rng.random::<f64>();
            [
                params.user_center[0] + r * theta.cos(),
                params.user_center[1] + r * theta.sin(),
                params.user_center[2],
            ]
        })
        .collect();
    let d_k = user_positions
        .iter()
        .map(|u| dist(u, &params.relay_pos))
        .collect();
    let d_relay_rms = dist(&params.relay_pos, &params.rms_pos);
    let delta = [
        params.relay_pos[0] - params.rms_pos[0],
        params.relay_pos[1] - params.rms_pos[1],
        params.relay_pos[2] - params.rms_pos[2],
    ];
    // Polar angle from the surface normal (z) and azimuth in the surface plane.
    let aoa_phi = (delta[2] / d_relay_rms).clamp(-1.0, 1.0).acos();
    let aoa_psi = delta[1].atan2(delta[0]);
    Topology {
        user_positions,
        d_k,
        d_relay_rms,
        r_hat: params.feed_distance,
        aoa_phi,
        aoa_psi,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAPER_TOML: &str = r#"
K = 5
N = 20
M = 25
W = 1e6
T = 1.0
sigma2_dbm = -70.0
c_t = 1e3
c_r = 1e3
c_m = 1e3
alpha_t = 1e-27
alpha_r = 0.3e-27
p_max_dbm = 40.0
f_t_max = 2e9
f_r_max = 3e9
f_m_max = 5e9
f_c = 3e9
nu = 3.0
alpha_pl = 3.0
c0_db = -30.0
kappa_db = 3.0
user_radius = 50.0
D = 1e6
epsilon = 1e-3
"#;

    #[test]
    fn db_conversions() {
        assert!((dbm_to_watt(-70.0) - 1e-10).abs() < 1e-22);
        assert!((dbm_to_watt(40.0) - 10.0).abs() < 1e-12);
        assert_eq!(db_to_linear(0.0), 1.0);
        assert!((db_to_linear(3.0) - 1.995_262_314_968_879_5).abs() < 1e-12);
    }

    #[test]
    fn full_config_matches_reference_defaults() {
        let p = load_params(PAPER_TOML).unwrap();
        let d = default_paper_params();
        assert_eq!(p.m(), 25);
        assert!((p.sigma2 - 1e-10).abs() < 1e-22);
        assert!((p.p_t_max - 10.0).abs() < 1e-12);
        assert!((p.p_r_max - 10.0).abs() < 1e-12);
        assert!((p.c0 - 1e-3).abs() < 1e-15);
        assert_eq!(p.delta2, p.sigma2);
        assert_eq!(p.kappa1, d.kappa1);
        assert_eq!(p.dc, d.dc);
        assert_eq!(p.d, vec![1e6; 5]);
    }

    #[test]
    fn c0_zero_db_is_unity() {
        let text = PAPER_TOML.replace("c0_db = -30.0", "c0_db = 0.0");
        assert_eq!(load_params(&text).unwrap().c0, 1.0);
    }

    #[test]
    fn missing_key_is_named() {
        let text = PAPER_TOML.replace("f_r_max = 3e9\n", "");
        assert_eq!(
            load_params(&text).unwrap_err(),
            ConfigError::MissingKey("f_r_max".into())
        );
    }

    #[test]
    fn preset_fills_missing_keys() {
        let p = load_params("preset = \"reference\"\nT = 2.0\nK = 3\n").unwrap();
        assert_eq!(p.t, 2.0);
        assert_eq!(p.k, 3);
        assert_eq!(p.d.len(), 3);
        assert_eq!(p.n, 20);
    }

    #[test]
    fn rejects_bad_values() {
        let text = PAPER_TOML.replace("T = 1.0", "T = -1.0");
        assert!(matches!(
            load_params(&text),
            Err(ConfigError::Invalid { key, .. }) if key == "T"
        ));
        let text = PAPER_TOML.replace("M = 25", "M = 24");
        assert!(matches!(
            load_params(&text),
            Err(ConfigError::Invalid { key, .. }) if key == "M"
        ));
        let text = format!("{PAPER_TOML}\nbogus = 1\n");
        assert_eq!(
            load_params(&text).unwrap_err(),
            ConfigError::UnknownKey("bogus".into())
        );
        assert!(matches!(
            load_params("K = ["),
            Err(ConfigError::Parse(_))
        ));
        let text = PAPER_TOML.replace("D = 1e6", "D = [1e6, 2e6]");
        assert!(matches!(
            load_params(&text),
            Err(ConfigError::Invalid { key, .. }) if key == "D"
        ));
    }

    #[test]
    fn reference_defaults() {
        let p = default_paper_params();
        assert_eq!(p.m(), 25);
        assert_eq!(p.n, 20);
        assert_eq!(p.k, 5);
        assert_eq!(p.epsilon, 1e-3);
        assert!((p.kappa1 - 1.995).abs() < 1e-3);
        p.validate().unwrap();
    }

    #[test]
    fn topology_geometry() {
        let p = default_paper_params();
        let topo = generate_topology(&p);
        assert!((topo.d_relay_rms - (25f64.powi(2) * 2.0).sqrt()).abs() < 1e-12);
        assert!((topo.d_relay_rms - 35.355).abs() < 1e-3);
        for u in &topo.user_positions {
            assert!(dist(u, &p.user_center) <= p.user_radius);
            assert_eq!(u[2], 0.0);
        }
        assert_eq!(topo.d_k.len(), 5);
        let origin = dist(&[0.0, 0.0, 0.0], &p.relay_pos);
        assert!((origin - 36.742).abs() < 1e-3);
        assert!((topo.aoa_phi - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!((topo.aoa_psi - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn topology_is_deterministic() {
        let p = default_paper_params();
        assert_eq!(generate_topology(&p), generate_topology(&p));
        let mut q = p.clone();
        q.seed = 2;
        assert_ne!(generate_topology(&p), generate_topology(&q));
    }

    #[test]
    fn streams_are_independent_of_order() {
        let s = SeededStreams::new(9);
        let a: f64 = s.stream(2, 3, 4).random();
        let _: f64 = s.stream(2, 0, 0).random();
        let b: f64 = s.stream(2, 3, 4).random();
        assert_eq!(a, b);
        let c: f64 = s.stream(2, 4, 3).random();
        assert_ne!(a, c);
    }

    proptest::proptest! {
        #[test]
        fn db_round_trip(x in 1e-15f64..1e6) {
            let back = db_to_linear(linear_to_db(x));
            proptest::prop_assert!(((back - x) / x).abs() < 1e-12);
            let back = dbm_to_watt(watt_to_dbm(x));
            proptest::prop_assert!(((back - x) / x).abs() < 1e-12);
        }
    }
}
