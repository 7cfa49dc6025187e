//! Closed-form secrecy outage, redundancy-rate elimination and the per-pair
//! secure energy efficiency.
//!
//! Eavesdropper `j` sees `sqrt(a1 a_rj) g_r^H Theta H w + sqrt(a_dj) g_d^H w`
//! with `g_r ~ CN(0, mu_r^2 I)` and `g_d ~ CN(0, mu_d^2 I)`, so its SNR is
//! exponential with mean `kappa1 ||Theta H w||^2 + kappa2 ||w||^2`. Choosing the
//! smallest redundancy rate that keeps the outage at `eps` leaves the rate
//!
//! ```text
//! log2(1 + |h_hat w|^2 / sigma^2) - log2(1 + ln(1/eps) (kappa1 ||Theta H w||^2 + kappa2 ||w||^2))
//! ```
//!
//! Because `Theta` is unitary the eavesdropper term does not depend on the
//! phases. In the augmented variable it is written `sum_m |v_m|^2 |(H_hat w)_m|^2`,
//! which is constant on the unit-modulus set.

use std::f64::consts::LN_2;

use crate::channel::{effective_channels, ChannelSet, EffectiveChannels};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::types::{is_within_power, Beamformer, PhaseVector, PowerModel};
use crate::{CMatrix, CVector, Complex64};

/// How the solvers model the eavesdropper's leakage `L`, entering the rate
/// as `-log2(1 + L)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Leakage {
    /// `L = ln(1/eps) (kappa1 sum_m |v_m|^2 |(H_hat w)_m|^2 + kappa2 ||w||^2)`.
    Statistical,
    /// A known eavesdropper channel `G`, stacked like `A_k`:
    /// `L = |v^H G w|^2 / sigma2`.
    Perfect { g: CMatrix, sigma2: f64 },
}

/// Everything needed to evaluate the objective of pair `(k, j)`.
#[derive(Debug, Clone)]
pub struct SecrecyContext {
    pub k: usize,
    pub j: usize,
    pub kappa1: f64,
    pub kappa2: f64,
    pub sigma2: f64,
    pub eps: f64,
    pub log_inv_eps: f64,
    pub eff: EffectiveChannels,
    pub power: PowerModel,
    pub p_max: f64,
    pub bandwidth_hz: f64,
    pub leakage: Leakage,
}

/// Secure EE of one `(w, Theta)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    /// Secrecy rate with `[.]^+` applied, bits/s/Hz.
    pub numerator_bits: f64,
    /// The same rate before clamping.
    pub rate_unclamped: f64,
    pub denominator_watts: f64,
    /// bits/s/Hz per watt.
    pub ee_per_hz: f64,
    /// bits per joule at the configured bandwidth.
    pub ee_bits_per_joule: f64,
}

impl SecrecyContext {
    pub fn new(cfg: &SystemConfig, cs: &ChannelSet, k: usize, j: usize) -> Self {
        let eps = cfg.sop_bounds[k];
        Self {
            k,
            j,
            kappa1: cs.kappa1(j),
            kappa2: cs.kappa2(j),
            sigma2: cs.sigma2_user,
            eps,
            log_inv_eps: (1.0 / eps).ln(),
            eff: effective_channels(cs, k),
            power: PowerModel::from_config(cfg),
            p_max: cfg.p_max,
            bandwidth_hz: cfg.bandwidth_hz,
            leakage: Leakage::Statistical,
        }
    }

    pub fn n_antennas(&self) -> usize {
        self.eff.a.ncols()
    }

    pub fn n_elements(&self) -> usize {
        self.eff.a.nrows() - 1
    }

    /// `v^H A_k w`.
    pub fn signal(&self, w: &CVector, v: &CVector) -> Complex64 {
        v.dotc(&(&self.eff.a * w))
    }

    /// Mean eavesdropper SNR, `kappa1 sum |v_m|^2 |(H_hat w)_m|^2 + kappa2 ||w||^2`.
    pub fn eve_mean_snr(&self, w: &CVector, v: &CVector) -> f64 {
        let hw = &self.eff.h_hat * w;
        let ris: f64 = hw.iter().zip(v.iter()).map(|(x, z)| z.norm_sqr() * x.norm_sqr()).sum();
        self.kappa1 * ris + self.kappa2 * w.norm_squared()
    }

    /// Leakage `L` as modeled by [`SecrecyContext::leakage`].
    pub fn leakage_value(&self, w: &CVector, v: &CVector) -> f64 {
        match &self.leakage {
            Leakage::Statistical => self.log_inv_eps * self.eve_mean_snr(w, v),
            Leakage::Perfect { g, sigma2 } => v.dotc(&(g * w)).norm_sqr() / sigma2,
        }
    }

    /// Unclamped rate `log2((1 + SNR) / (1 + L))` under the modeled leakage.
    pub fn rate(&self, w: &CVector, v: &CVector) -> f64 {
        let snr = self.signal(w, v).norm_sqr() / self.sigma2;
        (snr.ln_1p() - self.leakage_value(w, v).ln_1p()) / LN_2
    }

    /// Unclamped EE per Hz under the modeled leakage; the value the solvers climb.
    pub fn ratio(&self, w: &CVector, v: &CVector) -> f64 {
        self.rate(w, v) / self.power.total_power(w)
    }

    /// The leakage as a function of `w` for fixed `v`.
    pub fn leakage_in_w(&self, v: &CVector) -> LeakageW {
        match &self.leakage {
            Leakage::Statistical => {
                let weights: Vec<f64> = v.iter().map(|z| z.norm_sqr()).collect();
                LeakageW::Statistical {
                    h: self.eff.h_hat.clone(),
                    weights,
                    c1: self.log_inv_eps * self.kappa1,
                    c2: self.log_inv_eps * self.kappa2,
                }
            }
            Leakage::Perfect { g, sigma2 } => LeakageW::RankOne {
                g: g.ad_mul(v),
                scale: 1.0 / sigma2,
            },
        }
    }

    /// The leakage as a function of `v` for fixed `w`.
    pub fn leakage_in_v(&self, w: &CVector) -> LeakageV {
        match &self.leakage {
            Leakage::Statistical => {
                let hw = &self.eff.h_hat * w;
                LeakageV::Diagonal {
                    d: hw.iter().map(|x| self.log_inv_eps * self.kappa1 * x.norm_sqr()).collect(),
                    c0: self.log_inv_eps * self.kappa2 * w.norm_squared(),
                }
            }
            Leakage::Perfect { g, sigma2 } => LeakageV::RankOne {
                c: g * w,
                scale: 1.0 / sigma2,
            },
        }
    }
}

/// `L(w)` at fixed phases. Both forms are convex quadratics.
#[derive(Debug, Clone)]
pub enum LeakageW {
    /// `c1 sum_m weights_m |(H w)_m|^2 + c2 ||w||^2`.
    Statistical {
        h: CMatrix,
        weights: Vec<f64>,
        c1: f64,
        c2: f64,
    },
    /// `scale |g^H w|^2`.
    RankOne { g: CVector, scale: f64 },
}

impl LeakageW {
    pub fn value(&self, w: &CVector) -> f64 {
        match self {
            LeakageW::Statistical { h, weights, c1, c2 } => {
                let hw = h * w;
                let q: f64 = hw.iter().zip(weights).map(|(x, d)| d * x.norm_sqr()).sum();
                c1 * q + c2 * w.norm_squared()
            }
            LeakageW::RankOne { g, scale } => scale * g.dotc(w).norm_sqr(),
        }
    }

    pub fn value_grad(&self, w: &CVector) -> (f64, CVector) {
        match self {
            LeakageW::Statistical { h, weights, c1, c2 } => {
                let hw = h * w;
                let q: f64 = hw.iter().zip(weights).map(|(x, d)| d * x.norm_sqr()).sum();
                let weighted = CVector::from_fn(hw.len(), |m, _| hw[m] * weights[m]);
                let grad = h.ad_mul(&weighted) * Complex64::from(2.0 * c1) + w * Complex64::from(2.0 * c2);
                (c1 * q + c2 * w.norm_squared(), grad)
            }
            LeakageW::RankOne { g, scale } => {
                let x = g.dotc(w);
                (scale * x.norm_sqr(), g * (x * 2.0 * scale))
            }
        }
    }
}

/// `L(v)` at fixed beamformer.
#[derive(Debug, Clone)]
pub enum LeakageV {
    /// `sum_m d_m |v_m|^2 + c0`; constant on the unit-modulus set.
    Diagonal { d: Vec<f64>, c0: f64 },
    /// `scale |v^H c|^2`.
    RankOne { c: CVector, scale: f64 },
}

impl LeakageV {
    pub fn value(&self, v: &CVector) -> f64 {
        match self {
            LeakageV::Diagonal { d, c0 } => c0 + v.iter().zip(d).map(|(z, dm)| dm * z.norm_sqr()).sum::<f64>(),
            LeakageV::RankOne { c, scale } => scale * v.dotc(c).norm_sqr(),
        }
    }

    pub fn value_grad(&self, v: &CVector) -> (f64, CVector) {
        match self {
            LeakageV::Diagonal { d, .. } => {
                (self.value(v), CVector::from_fn(v.len(), |m, _| v[m] * (2.0 * d[m])))
            }
            LeakageV::RankOne { c, scale } => {
                let s = v.dotc(c);
                (scale * s.norm_sqr(), c * (s.conj() * 2.0 * scale))
            }
        }
    }

    /// Upper bound on the spectral norm of the Hessian.
    pub fn curvature_bound(&self) -> f64 {
        match self {
            LeakageV::Diagonal { d, .. } => 2.0 * d.iter().cloned().fold(0.0, f64::max),
            LeakageV::RankOne { c, scale } => 2.0 * scale * c.norm_squared(),
        }
    }
}

/// Concave minorant of `log2(1 + |x|^2 / sigma2)` that is tight at `xhat`:
///
/// ```text
/// [ln(1 + t) - t + 2 Re(conj(xhat) x)/sigma2 - t (sigma2 + |x|^2)/(sigma2 + |xhat|^2)] / ln 2,
/// t = |xhat|^2 / sigma2
/// ```
///
/// It follows from convexity of `|x|^2 / y` and touches the rate at `xhat`
/// with equal value and gradient.
#[derive(Debug, Clone, Copy)]
pub struct RateMinorant {
    pub xhat: Complex64,
    pub sigma2: f64,
    t: f64,
    quad: f64,
}

impl RateMinorant {
    pub fn new(xhat: Complex64, sigma2: f64) -> Self {
        let t = xhat.norm_sqr() / sigma2;
        Self {
            xhat,
            sigma2,
            t,
            quad: t / (sigma2 + xhat.norm_sqr()),
        }
    }

    pub fn value(&self, x: Complex64) -> f64 {
        let lin = 2.0 * (self.xhat.conj() * x).re / self.sigma2;
        (self.t.ln_1p() - self.t + lin - self.quad * (self.sigma2 + x.norm_sqr())) / LN_2
    }

    /// `2 d/dconj(x)` of [`RateMinorant::value`]. For `x = h^H w` the
    /// `w`-gradient is `h * coef`; for `x = v^H a` the `v`-gradient is
    /// `a * conj(coef)`.
    pub fn coef(&self, x: Complex64) -> Complex64 {
        (self.xhat * (2.0 / self.sigma2) - x * (2.0 * self.quad)) / LN_2
    }

    /// Curvature of the quadratic part, `2 quad / ln 2`.
    pub fn curvature(&self) -> f64 {
        2.0 * self.quad / LN_2
    }
}

/// Tangent-line majorant of `log2(1 + L)` at `lt`.
#[derive(Debug, Clone, Copy)]
pub struct LogMajorant {
    pub lt: f64,
}

impl LogMajorant {
    pub fn value(&self, l: f64) -> f64 {
        self.lt.ln_1p() / LN_2 + (l - self.lt) * self.slope()
    }

    pub fn slope(&self) -> f64 {
        1.0 / ((1.0 + self.lt) * LN_2)
    }
}

/// `||Theta H w||^2` from the reflection coefficients.
fn reflected_norm_sq(ctx: &SecrecyContext, w: &CVector, theta: &PhaseVector) -> f64 {
    let m = ctx.n_elements();
    let hw = ctx.eff.h_hat.rows(0, m) * w;
    let refl = theta.reflection();
    hw.iter().zip(refl.iter()).map(|(x, t)| (t * x).norm_sqr()).sum()
}

fn statistical_mean(ctx: &SecrecyContext, w: &CVector, theta: &PhaseVector) -> f64 {
    ctx.kappa1 * reflected_norm_sq(ctx, w, theta) + ctx.kappa2 * w.norm_squared()
}

/// Outage probability at redundancy rate `d` bits.
pub fn sop_closed_form(ctx: &SecrecyContext, w: &Beamformer, theta: &PhaseVector, d: f64) -> Result<f64> {
    if d == 0.0 {
        return Ok(1.0);
    }
    let mean = statistical_mean(ctx, &w.w, theta);
    if mean <= 0.0 {
        return Err(Error::ZeroSignalSop);
    }
    Ok((-(d * LN_2).exp_m1() / mean).exp())
}

/// Smallest redundancy rate meeting the outage bound with equality.
pub fn optimal_redundancy(ctx: &SecrecyContext, w: &Beamformer, theta: &PhaseVector) -> f64 {
    (statistical_mean(ctx, &w.w, theta) * ctx.log_inv_eps).ln_1p() / LN_2
}

/// Secure EE of pair `(k, j)` under the outage constraint. The phase vector is
/// read through its reflection coefficients, so a common rotation of `v` does
/// not change the result.
pub fn secure_ee(ctx: &SecrecyContext, w: &Beamformer, theta: &PhaseVector) -> Result<ObjectiveValue> {
    let norm_sq = w.norm_sq();
    if !is_within_power(norm_sq, ctx.p_max) {
        return Err(Error::InfeasibleBeamformer {
            norm_sq,
            p_max: ctx.p_max,
        });
    }
    let m = ctx.n_elements();
    let refl = theta.reflection();
    // Composite row h_hat = sqrt(a1 ar) h_r^H Theta H + sqrt(ad) h_d^H, read off A_k.
    let a = &ctx.eff.a;
    let mut gain = Complex64::new(0.0, 0.0);
    for n in 0..ctx.n_antennas() {
        let mut col = a[(m, n)];
        for r in 0..m {
            col += refl[r] * a[(r, n)];
        }
        gain += col * w.w[n];
    }
    let snr = gain.norm_sqr() / ctx.sigma2;
    let eve = statistical_mean(ctx, &w.w, theta) * ctx.log_inv_eps;
    let rate = ((1.0 + snr) / (1.0 + eve)).log2();
    let numerator = rate.max(0.0);
    let denom = ctx.power.total_power(&w.w);
    Ok(ObjectiveValue {
        numerator_bits: numerator,
        rate_unclamped: rate,
        denominator_watts: denom,
        ee_per_hz: numerator / denom,
        ee_bits_per_joule: numerator * ctx.bandwidth_hz / denom,
    })
}

/// All `K * J` contexts, ordered by `k` then `j`.
pub fn contexts(cfg: &SystemConfig, cs: &ChannelSet) -> Vec<SecrecyContext> {
    let mut out = Vec::with_capacity(cs.n_users() * cs.n_eves());
    for k in 0..cs.n_users() {
        for j in 0..cs.n_eves() {
            out.push(SecrecyContext::new(cfg, cs, k, j));
        }
    }
    out
}

/// Worst pair and its value. Indices are zero-based; ties go to the smallest
/// `k`, then the smallest `j`.
pub fn overall_objective(
    ctxs: &[SecrecyContext],
    w: &Beamformer,
    theta: &PhaseVector,
) -> Result<(ObjectiveValue, (usize, usize))> {
    let mut best: Option<(ObjectiveValue, (usize, usize))> = None;
    for ctx in ctxs {
        let val = secure_ee(ctx, w, theta)?;
        let key = (ctx.k, ctx.j);
        best = match best {
            None => Some((val, key)),
            Some((b, bk)) => {
                if val.ee_per_hz < b.ee_per_hz || (val.ee_per_hz == b.ee_per_hz && key < bk) {
                    Some((val, key))
                } else {
                    Some((b, bk))
                }
            }
        };
    }
    best.ok_or_else(|| Error::Geometry("no (k, j) pairs".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::generate_trial;
    use crate::config::RawConfig;
    use crate::rng::{complex_normal_vector, random_phases, stream, Purpose};
    use proptest::prelude::*;

    pub(crate) fn cfg(n: usize, m: usize, k: usize, j: usize) -> SystemConfig {
        let mut raw = RawConfig::default();
        raw.system.n_antennas = n;
        raw.system.n_elements = m;
        raw.system.n_users = k;
        raw.system.n_eves = j;
        raw.validate().unwrap()
    }

    fn instance(seed: u64) -> (SecrecyContext, Beamformer, PhaseVector) {
        let c = cfg(4, 4, 1, 1);
        let cs = generate_trial(&c, seed).unwrap();
        let ctx = SecrecyContext::new(&c, &cs, 0, 0);
        let mut rng = stream(seed, 0, Purpose::Oracle);
        let mut w = complex_normal_vector(&mut rng, 4, 1.0);
        w *= Complex64::from((c.p_max * 0.7).sqrt() / w.norm());
        let mut v = random_phases(&mut rng, 5);
        v[4] = Complex64::new(1.0, 0.0);
        (ctx, Beamformer { w }, PhaseVector { v })
    }

    #[test]
    fn zero_redundancy_always_outage() {
        let (ctx, w, v) = instance(1);
        assert_eq!(sop_closed_form(&ctx, &w, &v, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn zero_signal_is_undefined() {
        let (ctx, _, v) = instance(1);
        let err = sop_closed_form(&ctx, &Beamformer::zeros(4), &v, 1.0).unwrap_err();
        assert_eq!(err.to_string(), "undefined SOP for zero signal");
    }

    #[test]
    fn redundancy_inverts_bound() {
        for seed in 0..20 {
            let (ctx, w, v) = instance(seed);
            let d = optimal_redundancy(&ctx, &w, &v);
            let p = sop_closed_form(&ctx, &w, &v, d).unwrap();
            assert!((p - ctx.eps).abs() < 1e-10);
        }
        let (ctx, _, v) = instance(0);
        assert_eq!(optimal_redundancy(&ctx, &Beamformer::zeros(4), &v), 0.0);
    }

    #[test]
    fn unit_product_gives_one_bit() {
        let (mut ctx, w, v) = instance(3);
        let mean = statistical_mean(&ctx, &w.w, &v);
        ctx.log_inv_eps = 1.0 / mean;
        assert!((optimal_redundancy(&ctx, &w, &v) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_beam_has_zero_ee() {
        let (ctx, _, v) = instance(2);
        let val = secure_ee(&ctx, &Beamformer::zeros(4), &v).unwrap();
        assert_eq!(val.ee_per_hz, 0.0);
        assert!(val.denominator_watts > 0.0);
    }

    #[test]
    fn infeasible_beam_rejected() {
        let (ctx, w, v) = instance(2);
        let big = Beamformer { w: &w.w * Complex64::from(10.0) };
        assert!(secure_ee(&ctx, &big, &v).is_err());
    }

    #[test]
    fn two_codings_agree() {
        for seed in 0..30 {
            let (ctx, w, v) = instance(seed);
            let direct = secure_ee(&ctx, &w, &v).unwrap().rate_unclamped;
            let augmented = ctx.rate(&w.w, &v.v);
            assert!((direct - augmented).abs() < 1e-12, "{direct} vs {augmented}");
        }
    }

    #[test]
    fn spectral_efficiency_mode_has_constant_denominator() {
        let (mut ctx, w, v) = instance(4);
        ctx.power.inv_eta = 0.0;
        let val = secure_ee(&ctx, &w, &v).unwrap();
        assert_eq!(val.denominator_watts, ctx.power.static_power());
        assert!((val.ee_per_hz * val.denominator_watts - val.numerator_bits).abs() < 1e-15);
    }

    #[test]
    fn overall_min_and_ties() {
        let c = cfg(3, 3, 2, 2);
        let cs = generate_trial(&c, 8).unwrap();
        let ctxs = contexts(&c, &cs);
        let w = Beamformer { w: CVector::from_element(3, Complex64::new(0.01, 0.0)) };
        let v = PhaseVector::ones(3);
        let (val, key) = overall_objective(&ctxs, &w, &v).unwrap();
        let brute = ctxs
            .iter()
            .map(|x| secure_ee(x, &w, &v).unwrap().ee_per_hz)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(val.ee_per_hz, brute);
        assert_eq!(secure_ee(&ctxs[key.0 * 2 + key.1], &w, &v).unwrap().ee_per_hz, brute);

        let same = vec![ctxs[0].clone(), ctxs[0].clone()];
        let (_, key) = overall_objective(&same, &w, &v).unwrap();
        assert_eq!(key, (0, 0));
        let (_, key) = overall_objective(&ctxs[..1], &w, &v).unwrap();
        assert_eq!(key, (0, 0));
    }

    #[test]
    fn minorant_and_majorant_touch() {
        let r = RateMinorant::new(Complex64::new(0.3, -0.2), 0.05);
        let x = r.xhat;
        assert!((r.value(x) - (1.0 + x.norm_sqr() / 0.05).log2()).abs() < 1e-14);
        let l = LogMajorant { lt: 0.7 };
        assert!((l.value(0.7) - 1.7f64.log2()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn sop_decreasing_in_redundancy(seed in 0u64..50, d1 in 0.0f64..8.0, gap in 1e-3f64..4.0) {
            let (ctx, w, v) = instance(seed);
            let p1 = sop_closed_form(&ctx, &w, &v, d1).unwrap();
            let p2 = sop_closed_form(&ctx, &w, &v, d1 + gap).unwrap();
            // Deep outage probabilities underflow to 0.
            prop_assert!((0.0..=1.0).contains(&p1));
            prop_assert!(p2 < p1 || p1 < 1e-300);
        }

        #[test]
        fn global_phase_invariance(seed in 0u64..50, phi in 0.0f64..std::f64::consts::TAU) {
            let (ctx, w, v) = instance(seed);
            let rotated = PhaseVector { v: v.v.map(|z| z * Complex64::from_polar(1.0, phi)) };
            let a = secure_ee(&ctx, &w, &v).unwrap().ee_per_hz;
            let b = secure_ee(&ctx, &w, &rotated).unwrap().ee_per_hz;
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
            let ra = ctx.rate(&w.w, &v.v);
            let rb = ctx.rate(&w.w, &rotated.v);
            prop_assert!((ra - rb).abs() < 1e-12);
        }

        #[test]
        fn rate_minorant_lies_below(re in -1.0f64..1.0, im in -1.0f64..1.0, xr in -2.0f64..2.0, xi in -2.0f64..2.0) {
            let r = RateMinorant::new(Complex64::new(re, im), 0.1);
            let x = Complex64::new(xr, xi);
            prop_assert!((1.0 + x.norm_sqr() / 0.1).log2() >= r.value(x) - 1e-12);
        }
    }
}
