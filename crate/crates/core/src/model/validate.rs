//! Sampled checks of ellipticity, boundedness, growth and declared structure.

use super::{
    eigen_bounds, half_sigma_sigma_t, is_invertible, GameSpec, ModelError, Player, Structure,
    MAX_DIM,
};
use crate::math::{abs, sqrt};
use crate::rng::{stream_rng, uniform};
use alloc::format;
use alloc::string::String;

/// Growth constants at or above this value flag the data as pathological.
pub const GROWTH_PATHOLOGY: f64 = 1e6;

/// Half-width of the sampling box used for ellipticity, growth and structure.
const NEAR_BOX: f64 = 10.0;
/// Half-width of the box whose sup is compared against the near box for boundedness.
const FAR_BOX: f64 = 1000.0;
/// Far-box sup may exceed the near-box sup by at most this factor for bounded data.
const BOUNDED_RATIO: f64 = 10.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub samples_used: usize,
    pub ellipticity_ok: bool,
    /// Smallest eigenvalue of `a` over the samples (α⁻¹ surrogate).
    pub ellipticity_lower: f64,
    /// Largest eigenvalue of `a` over the samples (α surrogate).
    pub ellipticity_upper: f64,
    pub boundedness_ok: bool,
    pub sup_drift: f64,
    pub sup_running: [f64; 2],
    pub sup_terminal: [f64; 2],
    pub growth_ok: bool,
    /// max |f| / (1 + |x|)
    pub drift_growth_constant: f64,
    /// max (|g_i| + |h_i|) / (1 + |x|^β)
    pub payoff_growth_constant: f64,
    pub structure_ok: bool,
    /// Largest structural defect seen (0 for a perfect match).
    pub structure_defect: f64,
    pub structure_note: String,
}

impl ValidationReport {
    /// Ellipticity margin, the smallest eigenvalue of `a`.
    pub fn ellipticity_margin(&self) -> f64 {
        self.ellipticity_lower
    }

    /// True when every requirement of `structure` holds on the samples.
    /// Boundedness is waived for the unbounded-data structure.
    pub fn passed(&self, structure: Structure) -> bool {
        self.ellipticity_ok
            && self.growth_ok
            && self.structure_ok
            && (self.boundedness_ok || !structure.has_bounded_data())
    }
}

fn norm(v: &[f64]) -> f64 {
    sqrt(v.iter().map(|a| a * a).sum())
}

struct Sample {
    t: f64,
    x: [f64; MAX_DIM],
    u: [f64; 2],
    u_alt: [f64; 2],
}

/// Samples the game's coefficients and reports on ellipticity, boundedness,
/// growth and the declared structure. Deterministic in `seed`.
pub fn validate_spec(
    spec: &GameSpec,
    sample_count: usize,
    seed: u64,
) -> Result<ValidationReport, ModelError> {
    spec.check()?;
    if sample_count == 0 {
        return Err(ModelError::Invalid("sample_count must be at least 1".into()));
    }
    let dim = spec.dim;
    let mut rng = stream_rng(seed, 0);
    let mut draw = |half_width: f64| -> Sample {
        let t = spec.horizon * uniform(&mut rng);
        let mut x = [0.0; MAX_DIM];
        for xi in x.iter_mut().take(dim) {
            *xi = half_width * (2.0 * uniform(&mut rng) - 1.0);
        }
        let mut u = [0.0; 2];
        let mut u_alt = [0.0; 2];
        for k in 0..2 {
            u[k] = spec.controls[k].sample(uniform(&mut rng));
            u_alt[k] = spec.controls[k].sample(uniform(&mut rng));
        }
        Sample { t, x, u, u_alt }
    };

    let beta = spec.growth_exponent;
    let mut report = ValidationReport {
        samples_used: sample_count,
        ellipticity_ok: true,
        ellipticity_lower: f64::INFINITY,
        ellipticity_upper: 0.0,
        boundedness_ok: true,
        sup_drift: 0.0,
        sup_running: [0.0; 2],
        sup_terminal: [0.0; 2],
        growth_ok: true,
        drift_growth_constant: 0.0,
        payoff_growth_constant: 0.0,
        structure_ok: true,
        structure_defect: 0.0,
        structure_note: String::new(),
    };
    let mut near_sup: f64 = 0.0;
    let mut far_sup: f64 = 0.0;

    for i in 0..2 * sample_count {
        let far = i >= sample_count;
        let s = draw(if far { FAR_BOX } else { NEAR_BOX });
        let x = &s.x[..dim];
        let non_finite = |what: &str| ModelError::NonFinite { what: what.into(), t: s.t, x: s.x };

        let f = spec.drift_at(s.t, x, s.u[0], s.u[1]);
        if f.iter().any(|v| !v.is_finite()) {
            return Err(non_finite("drift"));
        }
        let mut h = [0.0; 2];
        let mut g = [0.0; 2];
        for p in Player::BOTH {
            h[p.index()] = spec.running_at(p, s.t, x, s.u[0], s.u[1]);
            g[p.index()] = spec.terminal_at(p, x);
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(non_finite("running payoff"));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(non_finite("terminal payoff"));
        }

        let fnorm = norm(&f[..dim]);
        let xnorm = norm(x);
        let local_sup = [fnorm, abs(h[0]), abs(h[1]), abs(g[0]), abs(g[1])]
            .into_iter()
            .fold(0.0, f64::max);
        if far {
            far_sup = far_sup.max(local_sup);
        } else {
            near_sup = near_sup.max(local_sup);
        }
        report.sup_drift = report.sup_drift.max(fnorm);
        for k in 0..2 {
            report.sup_running[k] = report.sup_running[k].max(abs(h[k]));
            report.sup_terminal[k] = report.sup_terminal[k].max(abs(g[k]));
        }
        report.drift_growth_constant = report.drift_growth_constant.max(fnorm / (1.0 + xnorm));
        let xb = if beta == 1.0 { xnorm } else { libm::pow(xnorm, beta) };
        for k in 0..2 {
            report.payoff_growth_constant =
                report.payoff_growth_constant.max((abs(g[k]) + abs(h[k])) / (1.0 + xb));
        }

        if far {
            continue;
        }
        let sig = spec.sigma_at(s.t, x);
        if sig.iter().flatten().any(|v| !v.is_finite()) {
            return Err(non_finite("sigma"));
        }
        if !is_invertible(&sig, dim) {
            return Err(ModelError::SingularSigma { t: s.t, x: s.x });
        }
        let (lo, hi) = eigen_bounds(&half_sigma_sigma_t(&sig, dim), dim);
        report.ellipticity_lower = report.ellipticity_lower.min(lo);
        report.ellipticity_upper = report.ellipticity_upper.max(hi);

        let (defect, note) = structure_defect(spec, &s);
        if defect > report.structure_defect {
            report.structure_defect = defect;
            report.structure_note = note;
        }
    }

    report.ellipticity_ok = report.ellipticity_lower > 0.0;
    report.growth_ok = report.drift_growth_constant < GROWTH_PATHOLOGY
        && report.payoff_growth_constant < GROWTH_PATHOLOGY;
    report.boundedness_ok =
        far_sup < GROWTH_PATHOLOGY && far_sup <= BOUNDED_RATIO * (1.0 + near_sup);
    report.structure_ok = report.structure_defect <= 1e-9;
    Ok(report)
}

/// Relative residual of the identities the declared structure asserts at one sample.
fn structure_defect(spec: &GameSpec, s: &Sample) -> (f64, String) {
    let dim = spec.dim;
    let x = &s.x[..dim];
    let t = s.t;
    let f = |u1: f64, u2: f64| spec.drift_at(t, x, u1, u2);
    let h = |p: Player, u1: f64, u2: f64| spec.running_at(p, t, x, u1, u2);
    let rel = |a: f64, scale: f64| abs(a) / (1.0 + abs(scale));
    let [u1, u2] = s.u;
    let [v1, v2] = s.u_alt;
    let mut worst = (0.0, String::new());
    let mut note = |d: f64, what: &str| {
        if d > worst.0 {
            worst = (d, format!("{what} at t={t}, x={x:?}"));
        }
    };
    match spec.structure {
        Structure::General => {}
        Structure::Separated => {
            let (a, b, c, d) = (f(u1, u2), f(v1, u2), f(u1, v2), f(v1, v2));
            for k in 0..dim {
                note(rel(a[k] - b[k] - c[k] + d[k], a[k]), "drift mixes u1 and u2");
            }
            let h1 = h(Player::One, u1, u2);
            note(rel(h1 - h(Player::One, u1, v2), h1), "h1 depends on u2");
            let h2 = h(Player::Two, u1, u2);
            note(rel(h2 - h(Player::Two, v1, u2), h2), "h2 depends on u1");
        }
        Structure::AffineBangBang | Structure::AffineUnbounded => {
            let base = f(0.0, 0.0);
            let e1 = f(1.0, 0.0);
            let e2 = f(0.0, 1.0);
            let full = f(u1, u2);
            for k in 0..dim {
                let lin = base[k] + (e1[k] - base[k]) * u1 + (e2[k] - base[k]) * u2;
                note(rel(full[k] - lin, full[k]), "drift not affine in (u1, u2)");
                if spec.structure == Structure::AffineBangBang {
                    note(rel(base[k], 0.0), "drift has a control-free part phi");
                }
            }
            let h1 = h(Player::One, u1, u2);
            note(rel(h1 - h(Player::One, 1.0, 0.0) * u1, h1), "h1 is not h1(t,x)*u1");
            let h2 = h(Player::Two, u1, u2);
            note(rel(h2 - h(Player::Two, 0.0, 1.0) * u2, h2), "h2 is not h2(t,x)*u2");
        }
    }
    worst
}
