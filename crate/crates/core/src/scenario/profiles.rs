//! Hourly demand and PV profiles: a synthetic generator and a CSV reader.

use crate::rng;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Per-bus hourly series, indexed `[t][bus]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSet {
    pub timestamps: Vec<u32>,
    pub p: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub pv: Vec<Vec<f64>>,
}

impl ProfileSet {
    pub fn t_total(&self) -> usize {
        self.timestamps.len()
    }

    pub fn n_buses(&self) -> usize {
        self.p.first().map_or(0, Vec::len)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileConfig {
    /// Standard deviation of the AR(1) innovation on the demand multiplier.
    pub noise_sigma: f64,
    pub ar_coeff: f64,
    /// Standard deviation of the per-day demand level.
    pub daily_sigma: f64,
    /// Fraction of buses that host PV.
    pub pv_fraction: f64,
    /// PV peak relative to the nominal demand of the host bus.
    pub pv_peak: f64,
    /// Largest per-day fractional PV reduction from cloud cover.
    pub cloud_variability: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            noise_sigma: 0.03,
            ar_coeff: 0.8,
            daily_sigma: 0.05,
            pv_fraction: 0.3,
            pv_peak: 0.4,
            cloud_variability: 0.4,
        }
    }
}

impl ProfileConfig {
    pub fn noiseless() -> Self {
        Self {
            noise_sigma: 0.0,
            daily_sigma: 0.0,
            cloud_variability: 0.0,
            ..Self::default()
        }
    }
}

/// Morning and evening peaks, trough before dawn.
pub fn daily_shape(hour: f64) -> f64 {
    1.0 - 0.22 * (2.0 * PI * (hour - 1.0) / 24.0).cos() - 0.18 * (4.0 * PI * (hour - 2.0) / 24.0).cos()
}

/// Clear-sky PV output in [0, 1], nonzero between 6 h and 20 h.
pub fn pv_shape(hour: f64) -> f64 {
    let h = hour.rem_euclid(24.0);
    if !(6.0..=20.0).contains(&h) {
        return 0.0;
    }
    (-(h - 13.0).powi(2) / (2.0 * 2.5 * 2.5)).exp()
}

/// Unit-scale profiles: `p` and `q` are demand multipliers around 1 and
/// `pv` is output relative to the host bus nominal demand.
pub fn synth_profiles(n_buses: usize, t_total: usize, seed: u64) -> ProfileSet {
    synth_profiles_with(n_buses, t_total, seed, &ProfileConfig::default())
}

pub fn synth_profiles_with(n_buses: usize, t_total: usize, seed: u64, cfg: &ProfileConfig) -> ProfileSet {
    let mut r = rng::stream(seed, &[rng::tag::PROFILE]);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let days = t_total.div_ceil(24).max(1);
    let daily: Vec<f64> = (0..days)
        .map(|_| 1.0 + cfg.daily_sigma * unit.sample(&mut r))
        .collect();
    let hosts_pv: Vec<bool> = (0..n_buses).map(|_| r.gen_bool(cfg.pv_fraction.clamp(0.0, 1.0))).collect();
    let cloud: Vec<f64> = (0..days)
        .map(|_| 1.0 - cfg.cloud_variability * r.gen::<f64>())
        .collect();

    let mut p = vec![vec![0.0; n_buses]; t_total];
    let mut q = vec![vec![0.0; n_buses]; t_total];
    let mut pv = vec![vec![0.0; n_buses]; t_total];
    for n in 0..n_buses {
        let shift = r.gen_range(-1.0..1.0);
        let q_ratio = r.gen_range(0.9..1.1);
        let mut ar_p = 0.0;
        let mut ar_q = 0.0;
        for t in 0..t_total {
            ar_p = cfg.ar_coeff * ar_p + cfg.noise_sigma * unit.sample(&mut r);
            ar_q = cfg.ar_coeff * ar_q + cfg.noise_sigma * unit.sample(&mut r);
            let base = daily_shape((t % 24) as f64 + shift) * daily[t / 24];
            p[t][n] = (base + ar_p).max(0.05);
            q[t][n] = (base * q_ratio + ar_q).max(0.05);
            if hosts_pv[n] {
                pv[t][n] = cfg.pv_peak * cloud[t / 24] * pv_shape(t as f64);
            }
        }
    }
    ProfileSet {
        timestamps: (0..t_total as u32).collect(),
        p,
        q,
        pv,
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ProfileError {
    #[error("missing profile row for t={0}, bus={1}")]
    MissingCell(u32, u32),
    #[error("non-numeric value `{value}` on line {line}")]
    NonNumeric { line: usize, value: String },
    #[error("bad profile csv: {0}")]
    Malformed(String),
}

/// Reads `t,bus,p,q,pv` rows into a dense set with buses ordered by id.
pub fn ingest_profiles_csv(text: &str) -> Result<ProfileSet, ProfileError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| ProfileError::Malformed("empty input".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["t", "bus", "p", "q", "pv"] {
        return Err(ProfileError::Malformed(format!("expected header t,bus,p,q,pv, got `{header}`")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 5 {
            return Err(ProfileError::Malformed(format!("line {} has {} cells", i + 1, cells.len())));
        }
        let num = |s: &str| -> Result<f64, ProfileError> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| ProfileError::NonNumeric {
                    line: i + 1,
                    value: s.to_string(),
                })
        };
        let int = |s: &str| -> Result<u32, ProfileError> {
            s.parse::<u32>().map_err(|_| ProfileError::NonNumeric {
                line: i + 1,
                value: s.to_string(),
            })
        };
        rows.push((int(cells[0])?, int(cells[1])?, num(cells[2])?, num(cells[3])?, num(cells[4])?));
    }
    let mut ts: Vec<u32> = rows.iter().map(|r| r.0).collect();
    let mut buses: Vec<u32> = rows.iter().map(|r| r.1).collect();
    ts.sort_unstable();
    ts.dedup();
    buses.sort_unstable();
    buses.dedup();
    let (nt, nb) = (ts.len(), buses.len());
    let mut filled = vec![vec![false; nb]; nt];
    let mut p = vec![vec![0.0; nb]; nt];
    let mut q = p.clone();
    let mut pv = p.clone();
    for (t, b, pp, qq, ss) in rows {
        let ti = ts.binary_search(&t).unwrap();
        let bi = buses.binary_search(&b).unwrap();
        filled[ti][bi] = true;
        p[ti][bi] = pp;
        q[ti][bi] = qq;
        pv[ti][bi] = ss.max(0.0);
    }
    for (ti, row) in filled.iter().enumerate() {
        if let Some(bi) = row.iter().position(|f| !f) {
            return Err(ProfileError::MissingCell(ts[ti], buses[bi]));
        }
    }
    Ok(ProfileSet {
        timestamps: ts,
        p,
        q,
        pv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn daily_cycle_ratio() {
        let prof = synth_profiles_with(3, 24, 1, &ProfileConfig::noiseless());
        for n in 0..3 {
            let col: Vec<f64> = prof.p.iter().map(|r| r[n]).collect();
            let hi = col.iter().cloned().fold(f64::MIN, f64::max);
            let lo = col.iter().cloned().fold(f64::MAX, f64::min);
            assert!((1.5..=3.0).contains(&(hi / lo)), "ratio {}", hi / lo);
        }
    }

    #[test]
    fn noiseless_is_periodic() {
        let prof = synth_profiles_with(4, 96, 3, &ProfileConfig::noiseless());
        for t in 0..72 {
            assert_eq!(prof.p[t], prof.p[t + 24]);
            assert_eq!(prof.pv[t], prof.pv[t + 24]);
        }
    }

    #[test]
    fn seeded() {
        assert_eq!(synth_profiles(5, 48, 9), synth_profiles(5, 48, 9));
        assert_ne!(synth_profiles(5, 48, 9), synth_profiles(5, 48, 10));
    }

    #[test]
    fn csv_paths() {
        let ok = "t,bus,p,q,pv\n0,1,1,0.5,0\n0,2,2,1,0\n1,1,1.1,0.5,0.1\n1,2,2.1,1,0\n";
        let prof = ingest_profiles_csv(ok).unwrap();
        assert_eq!((prof.t_total(), prof.n_buses()), (2, 2));
        assert_eq!(prof.p[1][0], 1.1);
        let missing = "t,bus,p,q,pv\n0,1,1,0.5,0\n0,2,2,1,0\n1,1,1.1,0.5,0.1\n";
        assert_eq!(ingest_profiles_csv(missing), Err(ProfileError::MissingCell(1, 2)));
        let bad = "t,bus,p,q,pv\n0,1,abc,0.5,0\n";
        assert!(matches!(ingest_profiles_csv(bad), Err(ProfileError::NonNumeric { .. })));
    }
}
