//! Trial generation: node placement, log-distance path loss and Rayleigh fading.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::rng::{complex_normal_matrix, complex_normal_vector, stream, Purpose};
use crate::types::PhaseVector;
use crate::{CMatrix, CVector, Complex64};

/// One realization of every legitimate channel plus the eavesdroppers'
/// large-scale statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub seed: u64,
    pub trial: u64,
    /// BS to RIS, `M x N`.
    pub h: CMatrix,
    /// RIS to user `k`, length `M`.
    pub h_r: Vec<CVector>,
    /// BS to user `k`, length `N`.
    pub h_d: Vec<CVector>,
    pub alpha_1: f64,
    pub alpha_r: Vec<f64>,
    pub alpha_d: Vec<f64>,
    pub alpha_r_eve: Vec<f64>,
    pub alpha_d_eve: Vec<f64>,
    /// Small-scale variance of the RIS-Eve and BS-Eve links.
    pub mu_r2: Vec<f64>,
    pub mu_d2: Vec<f64>,
    pub sigma2_user: f64,
    pub sigma2_eve: f64,
    pub user_positions: Vec<[f64; 2]>,
    pub eve_positions: Vec<[f64; 2]>,
}

/// Stacked channels of user `k`. Both matrices are `(M+1) x N`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannels {
    /// `[sqrt(a1 ar) diag(h_r^H) H ; sqrt(ad) h_d^H]`, so `v^H A w` is the
    /// composite gain.
    pub a: CMatrix,
    /// `[H ; 0]`.
    pub h_hat: CMatrix,
}

impl ChannelSet {
    pub fn n_antennas(&self) -> usize {
        self.h.ncols()
    }

    pub fn n_elements(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_users(&self) -> usize {
        self.h_r.len()
    }

    pub fn n_eves(&self) -> usize {
        self.alpha_r_eve.len()
    }

    pub fn kappa1(&self, j: usize) -> f64 {
        self.alpha_1 * self.alpha_r_eve[j] * self.mu_r2[j] / self.sigma2_eve
    }

    pub fn kappa2(&self, j: usize) -> f64 {
        self.alpha_d_eve[j] * self.mu_d2[j] / self.sigma2_eve
    }

    /// Composite gain `h_hat(Theta) w` computed directly from the reflection
    /// coefficients, without the augmented stacking.
    pub fn composite_gain(&self, k: usize, theta: &PhaseVector, w: &CVector) -> Complex64 {
        let refl = theta.reflection();
        let hw = &self.h * w;
        let ris: Complex64 = (0..self.n_elements())
            .map(|m| self.h_r[k][m].conj() * refl[m] * hw[m])
            .sum();
        (self.alpha_1 * self.alpha_r[k]).sqrt() * ris + self.alpha_d[k].sqrt() * self.h_d[k].dotc(w)
    }

    /// Draws one eavesdropper realization consistent with the statistics, stacked
    /// the same way as [`EffectiveChannels::a`].
    pub fn draw_eve_channel<R: Rng + ?Sized>(&self, j: usize, rng: &mut R) -> CMatrix {
        let g_r = complex_normal_vector(rng, self.n_elements(), self.mu_r2[j]);
        let g_d = complex_normal_vector(rng, self.n_antennas(), self.mu_d2[j]);
        stack(&self.h, &g_r, &g_d, self.alpha_1 * self.alpha_r_eve[j], self.alpha_d_eve[j])
    }
}

fn stack(h: &CMatrix, g_r: &CVector, g_d: &CVector, ris_gain: f64, direct_gain: f64) -> CMatrix {
    let (m, n) = h.shape();
    let sr = ris_gain.sqrt();
    let sd = direct_gain.sqrt();
    let mut a = CMatrix::zeros(m + 1, n);
    for r in 0..m {
        let c = g_r[r].conj() * sr;
        for col in 0..n {
            a[(r, col)] = c * h[(r, col)];
        }
    }
    for col in 0..n {
        a[(m, col)] = g_d[col].conj() * sd;
    }
    a
}

pub fn effective_channels(cs: &ChannelSet, k: usize) -> EffectiveChannels {
    let a = stack(&cs.h, &cs.h_r[k], &cs.h_d[k], cs.alpha_1 * cs.alpha_r[k], cs.alpha_d[k]);
    let (m, n) = cs.h.shape();
    let mut h_hat = CMatrix::zeros(m + 1, n);
    h_hat.rows_mut(0, m).copy_from(&cs.h);
    EffectiveChannels { a, h_hat }
}

/// Log-distance gain `10^(-(ref_loss + 10 n log10(d/d0))/10)`.
pub fn pathloss(distance: f64, exponent: f64, ref_loss_db: f64, ref_distance: f64) -> Result<f64> {
    if !(distance.is_finite() && ref_distance > 0.0) {
        return Err(Error::Geometry(format!("distance {distance} m")));
    }
    if distance < ref_distance {
        return Err(Error::BelowReferenceDistance {
            distance,
            reference: ref_distance,
        });
    }
    let loss_db = ref_loss_db + 10.0 * exponent * (distance / ref_distance).log10();
    Ok(10f64.powf(-loss_db / 10.0))
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Draws trial `trial` of the experiment seeded by `master`.
pub fn generate_trial_at(cfg: &SystemConfig, master: u64, trial: u64) -> Result<ChannelSet> {
    let mut rng = stream(master, trial, Purpose::Channels);
    generate_with(cfg, &mut rng, master, trial)
}

/// Draws a trial from a single seed; equal seeds give identical sets.
pub fn generate_trial(cfg: &SystemConfig, seed: u64) -> Result<ChannelSet> {
    generate_trial_at(cfg, seed, 0)
}

fn generate_with(cfg: &SystemConfig, rng: &mut ChaCha8Rng, seed: u64, trial: u64) -> Result<ChannelSet> {
    let g = &cfg.geometry;
    let pl = &cfg.pathloss;
    let gain = |d: f64, n: f64| pathloss(d, n, pl.ref_loss_db, pl.ref_distance);

    let user_positions: Vec<[f64; 2]> = (0..cfg.n_users)
        .map(|_| {
            let r = g.user_radius * rng.random::<f64>().sqrt();
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            [g.user_center[0] + r * phi.cos(), g.user_center[1] + r * phi.sin()]
        })
        .collect();
    let eve_positions: Vec<[f64; 2]> = (0..cfg.n_eves)
        .map(|_| {
            let d = if g.eve_ris_max > g.eve_ris_min {
                rng.random_range(g.eve_ris_min..=g.eve_ris_max)
            } else {
                g.eve_ris_min
            };
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            [g.ris[0] + d * phi.cos(), g.ris[1] + d * phi.sin()]
        })
        .collect();

    let alpha_1 = gain(dist(g.bs, g.ris), pl.exp_bs_ris)?;
    let alpha_r = user_positions
        .iter()
        .map(|p| gain(dist(g.ris, *p), pl.exp_ris_user))
        .collect::<Result<Vec<_>>>()?;
    let alpha_d = user_positions
        .iter()
        .map(|p| gain(dist(g.bs, *p), pl.exp_bs_user))
        .collect::<Result<Vec<_>>>()?;
    let alpha_r_eve = eve_positions
        .iter()
        .map(|p| gain(dist(g.ris, *p), pl.exp_ris_eve))
        .collect::<Result<Vec<_>>>()?;
    let alpha_d_eve = eve_positions
        .iter()
        .map(|p| gain(dist(g.bs, *p), pl.exp_bs_eve))
        .collect::<Result<Vec<_>>>()?;

    let (n, m) = (cfg.n_antennas, cfg.n_elements);
    let h = complex_normal_matrix(rng, m, n, 1.0);
    let h_r = (0..cfg.n_users).map(|_| complex_normal_vector(rng, m, 1.0)).collect();
    let h_d = (0..cfg.n_users).map(|_| complex_normal_vector(rng, n, 1.0)).collect();

    Ok(ChannelSet {
        seed,
        trial,
        h,
        h_r,
        h_d,
        alpha_1,
        alpha_r,
        alpha_d,
        alpha_r_eve,
        alpha_d_eve,
        mu_r2: vec![pl.eve_var_ris; cfg.n_eves],
        mu_d2: vec![pl.eve_var_direct; cfg.n_eves],
        sigma2_user: cfg.sigma2_user,
        sigma2_eve: cfg.sigma2_eve,
        user_positions,
        eve_positions,
    })
}

// Text dump. Line oriented, `#` comments allowed:
//
//   risee-channels 1
//   dims <N> <M> <K> <J>
//   seed <seed> <trial>
//   <scalar-key> <value>                      (alpha_1, sigma2_user, sigma2_eve)
//   <vector-key> <len> <values...>            (alpha_r, alpha_d, ..., mu_d2)
//   positions <user|eve> <idx> <x> <y>
//   matrix <name> <rows> <cols>               followed by <rows> lines of
//                                             <cols> "re im" pairs, row-major
//
// Matrix names are `H`, `h_r.<k>` (M x 1) and `h_d.<k>` (N x 1). Floats are
// written in shortest round-trip form, so load(dump(x)) == x bitwise.

const MAGIC: &str = "risee-channels 1";

pub fn dump_channels(cs: &ChannelSet) -> String {
    let mut out = String::new();
    let (m, n) = cs.h.shape();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "dims {n} {m} {} {}", cs.n_users(), cs.n_eves());
    let _ = writeln!(out, "seed {} {}", cs.seed, cs.trial);
    let _ = writeln!(out, "alpha_1 {:?}", cs.alpha_1);
    let _ = writeln!(out, "sigma2_user {:?}", cs.sigma2_user);
    let _ = writeln!(out, "sigma2_eve {:?}", cs.sigma2_eve);
    for (key, v) in [
        ("alpha_r", &cs.alpha_r),
        ("alpha_d", &cs.alpha_d),
        ("alpha_r_eve", &cs.alpha_r_eve),
        ("alpha_d_eve", &cs.alpha_d_eve),
        ("mu_r2", &cs.mu_r2),
        ("mu_d2", &cs.mu_d2),
    ] {
        let _ = write!(out, "{key} {}", v.len());
        for x in v {
            let _ = write!(out, " {x:?}");
        }
        out.push('\n');
    }
    for (kind, ps) in [("user", &cs.user_positions), ("eve", &cs.eve_positions)] {
        for (i, p) in ps.iter().enumerate() {
            let _ = writeln!(out, "positions {kind} {i} {:?} {:?}", p[0], p[1]);
        }
    }
    write_matrix(&mut out, "H", cs.h.nrows(), cs.h.ncols(), |r, c| cs.h[(r, c)]);
    for (k, v) in cs.h_r.iter().enumerate() {
        write_matrix(&mut out, &format!("h_r.{k}"), v.len(), 1, |r, _| v[r]);
    }
    for (k, v) in cs.h_d.iter().enumerate() {
        write_matrix(&mut out, &format!("h_d.{k}"), v.len(), 1, |r, _| v[r]);
    }
    out
}

fn write_matrix(out: &mut String, name: &str, rows: usize, cols: usize, at: impl Fn(usize, usize) -> Complex64) {
    let _ = writeln!(out, "matrix {name} {rows} {cols}");
    for r in 0..rows {
        let line: Vec<String> = (0..cols)
            .map(|c| {
                let z = at(r, c);
                format!("{:?} {:?}", z.re, z.im)
            })
            .collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::ChannelFormat(msg.into())
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| bad(format!("bad number `{s}`")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse::<usize>().map_err(|_| bad(format!("bad integer `{s}`")))
}

pub fn load_channels(text: &str) -> Result<ChannelSet> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    if lines.next() != Some(MAGIC) {
        return Err(bad("missing header line"));
    }
    let mut dims: Option<[usize; 4]> = None;
    let mut seed = (0u64, 0u64);
    let mut scalars = std::collections::BTreeMap::<String, f64>::new();
    let mut vectors = std::collections::BTreeMap::<String, Vec<f64>>::new();
    let mut users = Vec::new();
    let mut eves = Vec::new();
    let mut matrices = std::collections::BTreeMap::<String, CMatrix>::new();

    while let Some(line) = lines.next() {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok[0] {
            "dims" if tok.len() == 5 => {
                dims = Some([
                    parse_usize(tok[1])?,
                    parse_usize(tok[2])?,
                    parse_usize(tok[3])?,
                    parse_usize(tok[4])?,
                ]);
            }
            "seed" if tok.len() == 3 => {
                seed = (
                    tok[1].parse().map_err(|_| bad("bad seed"))?,
                    tok[2].parse().map_err(|_| bad("bad trial"))?,
                );
            }
            "alpha_1" | "sigma2_user" | "sigma2_eve" if tok.len() == 2 => {
                scalars.insert(tok[0].to_string(), parse_f64(tok[1])?);
            }
            "alpha_r" | "alpha_d" | "alpha_r_eve" | "alpha_d_eve" | "mu_r2" | "mu_d2" => {
                let len = parse_usize(tok.get(1).ok_or_else(|| bad("missing length"))?)?;
                if tok.len() != len + 2 {
                    return Err(bad(format!("`{}` expects {len} values", tok[0])));
                }
                let vals = tok[2..].iter().map(|s| parse_f64(s)).collect::<Result<Vec<_>>>()?;
                vectors.insert(tok[0].to_string(), vals);
            }
            "positions" if tok.len() == 5 => {
                let p = [parse_f64(tok[3])?, parse_f64(tok[4])?];
                match tok[1] {
                    "user" => users.push(p),
                    "eve" => eves.push(p),
                    other => return Err(bad(format!("unknown position kind `{other}`"))),
                }
            }
            "matrix" if tok.len() == 4 => {
                let (rows, cols) = (parse_usize(tok[2])?, parse_usize(tok[3])?);
                let mut mat = CMatrix::zeros(rows, cols);
                for r in 0..rows {
                    let row = lines.next().ok_or_else(|| bad(format!("matrix {} truncated", tok[1])))?;
                    let vals: Vec<&str> = row.split_whitespace().collect();
                    if vals.len() != 2 * cols {
                        return Err(bad(format!("matrix {} row {r} has {} numbers", tok[1], vals.len())));
                    }
                    for c in 0..cols {
                        mat[(r, c)] = Complex64::new(parse_f64(vals[2 * c])?, parse_f64(vals[2 * c + 1])?);
                    }
                }
                matrices.insert(tok[1].to_string(), mat);
            }
            _ => return Err(bad(format!("unrecognized line `{line}`"))),
        }
    }

    let [n, m, k, j] = dims.ok_or_else(|| bad("missing dims"))?;
    let scalar = |key: &str| scalars.get(key).copied().ok_or_else(|| bad(format!("missing {key}")));
    let vector = |key: &str, len: usize| -> Result<Vec<f64>> {
        let v = vectors.get(key).cloned().ok_or_else(|| bad(format!("missing {key}")))?;
        if v.len() != len {
            return Err(bad(format!("{key} has {} entries, expected {len}", v.len())));
        }
        Ok(v)
    };
    let mut take = |name: &str, rows: usize, cols: usize| -> Result<CMatrix> {
        let mat = matrices.remove(name).ok_or_else(|| bad(format!("missing matrix {name}")))?;
        if mat.shape() != (rows, cols) {
            return Err(bad(format!("matrix {name} has shape {:?}", mat.shape())));
        }
        Ok(mat)
    };
    let h = take("H", m, n)?;
    let h_r = (0..k)
        .map(|i| take(&format!("h_r.{i}"), m, 1).map(|x| x.column(0).into_owned()))
        .collect::<Result<Vec<_>>>()?;
    let h_d = (0..k)
        .map(|i| take(&format!("h_d.{i}"), n, 1).map(|x| x.column(0).into_owned()))
        .collect::<Result<Vec<_>>>()?;
    if users.len() != k || eves.len() != j {
        return Err(bad("position count does not match dims"));
    }
    Ok(ChannelSet {
        seed: seed.0,
        trial: seed.1,
        h,
        h_r,
        h_d,
        alpha_1: scalar("alpha_1")?,
        alpha_r: vector("alpha_r", k)?,
        alpha_d: vector("alpha_d", k)?,
        alpha_r_eve: vector("alpha_r_eve", j)?,
        alpha_d_eve: vector("alpha_d_eve", j)?,
        mu_r2: vector("mu_r2", j)?,
        mu_d2: vector("mu_d2", j)?,
        sigma2_user: scalar("sigma2_user")?,
        sigma2_eve: scalar("sigma2_eve")?,
        user_positions: users,
        eve_positions: eves,
    })
}

pub fn save_channels(cs: &ChannelSet, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, dump_channels(cs))?;
    Ok(())
}

pub fn read_channels(path: impl AsRef<Path>) -> Result<ChannelSet> {
    load_channels(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RawConfig;

    fn small_cfg() -> SystemConfig {
        let mut raw = RawConfig::default();
        raw.system.n_antennas = 3;
        raw.system.n_elements = 4;
        raw.system.n_users = 2;
        raw.system.n_eves = 3;
        raw.validate().unwrap()
    }

    #[test]
    fn pathloss_reference_points() {
        assert!((pathloss(1.0, 3.0, 30.0, 1.0).unwrap() - 1e-3).abs() < 1e-18);
        assert!((pathloss(10.0, 2.0, 30.0, 1.0).unwrap() - 1e-5).abs() < 1e-18);
        let g1 = pathloss(7.0, 2.2, 30.0, 1.0).unwrap();
        let g2 = pathloss(14.0, 2.2, 30.0, 1.0).unwrap();
        assert!((g2 / g1 - 2f64.powf(-2.2)).abs() < 1e-12);
        assert!(matches!(
            pathloss(0.5, 2.0, 30.0, 1.0),
            Err(Error::BelowReferenceDistance { .. })
        ));
    }

    #[test]
    fn same_seed_same_trial() {
        let cfg = small_cfg();
        assert_eq!(generate_trial(&cfg, 5).unwrap(), generate_trial(&cfg, 5).unwrap());
        assert_ne!(generate_trial(&cfg, 5).unwrap().h, generate_trial(&cfg, 6).unwrap().h);
    }

    #[test]
    fn bs_ris_distance_sets_alpha_1() {
        let cfg = small_cfg();
        let cs = generate_trial(&cfg, 1).unwrap();
        assert!((cs.alpha_1 - pathloss(50.0, 2.2, 30.0, 1.0).unwrap()).abs() < 1e-20);
    }

    #[test]
    fn nodes_fall_in_configured_regions() {
        let cfg = small_cfg();
        for seed in 0..20 {
            let cs = generate_trial(&cfg, seed).unwrap();
            for p in &cs.user_positions {
                assert!(dist(*p, cfg.geometry.user_center) <= cfg.geometry.user_radius + 1e-12);
            }
            for p in &cs.eve_positions {
                let d = dist(*p, cfg.geometry.ris);
                assert!((1.0 - 1e-12..=10.0 + 1e-12).contains(&d));
            }
            assert!((0..3).all(|j| cs.kappa1(j) > 0.0 && cs.kappa2(j) > 0.0));
        }
    }

    #[test]
    fn scalar_stacking() {
        let cs = ChannelSet {
            seed: 0,
            trial: 0,
            h: CMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)),
            h_r: vec![CVector::from_element(1, Complex64::new(1.0, 0.0))],
            h_d: vec![CVector::from_element(1, Complex64::new(1.0, 0.0))],
            alpha_1: 1.0,
            alpha_r: vec![1.0],
            alpha_d: vec![1.0],
            alpha_r_eve: vec![1.0],
            alpha_d_eve: vec![1.0],
            mu_r2: vec![1.0],
            mu_d2: vec![1.0],
            sigma2_user: 1.0,
            sigma2_eve: 1.0,
            user_positions: vec![[0.0, 0.0]],
            eve_positions: vec![[0.0, 0.0]],
        };
        let eff = effective_channels(&cs, 0);
        let one = Complex64::new(1.0, 0.0);
        assert_eq!(eff.a, CMatrix::from_column_slice(2, 1, &[one, one]));
        assert_eq!(eff.h_hat, CMatrix::from_column_slice(2, 1, &[one, Complex64::new(0.0, 0.0)]));
    }

    #[test]
    fn dump_round_trip_is_exact() {
        let cs = generate_trial(&small_cfg(), 9).unwrap();
        let text = dump_channels(&cs);
        assert_eq!(load_channels(&text).unwrap(), cs);
    }

    #[test]
    fn load_rejects_truncated_input() {
        let cs = generate_trial(&small_cfg(), 9).unwrap();
        let text = dump_channels(&cs);
        let cut: String = text.lines().take(12).collect::<Vec<_>>().join("\n");
        assert!(load_channels(&cut).is_err());
        assert!(load_channels("nonsense").is_err());
    }
}
