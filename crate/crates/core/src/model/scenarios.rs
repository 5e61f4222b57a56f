//! Built-in games: the three structural cases plus two analytic oracles.
//!
//! Every scenario exists twice: natively (closures) and as DSL text
//! ([`builtin_source`]). The two must agree to round-off.

use super::{Coeff, ControlSet, GameSpec, ModelError, SpecSource, Structure};
use crate::feedback::heaviside_ramp;
use crate::math::{cos, exp, sin, sqrt};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

/// (name, one-line description)
pub const BUILTIN_SCENARIOS: [(&str, &str); 5] = [
    (
        "case1-continuous",
        "bounded data, quadratic control costs, continuous clamp feedbacks (N=1)",
    ),
    (
        "case2-bangbang",
        "affine dynamics and payoffs, U1=U2=[0,1], Heaviside feedbacks (N=1)",
    ),
    (
        "case3-unbounded",
        "affine drift with linear growth, h=0, quadratic terminal payoffs, beta=2 (N=1)",
    ),
    ("heat-oracle", "drift 0, h 0, sigma=sqrt(2), g=cos(x1): V(s,x)=exp(-s)cos(x)"),
    ("linear-oracle", "drift 0, h 0, constant sigma, g=x1: V(s,x)=x"),
];

fn unknown(name: &str) -> ModelError {
    ModelError::UnknownScenario {
        name: name.into(),
        available: BUILTIN_SCENARIOS.iter().map(|s| s.0).collect(),
    }
}

fn unit() -> ControlSet {
    ControlSet::interval(0.0, 1.0).expect("valid interval")
}

fn gauss_bump(center: f64) -> Coeff {
    Coeff::native(move |p| {
        let d = p.x[0] - center;
        exp(-d * d)
    })
}

/// Native construction of a built-in game.
pub fn builtin_scenario(name: &str) -> Result<GameSpec, ModelError> {
    let spec = match name {
        "case1-continuous" => GameSpec {
            name: name.into(),
            dim: 1,
            horizon: 1.0,
            sigma: vec![Coeff::constant(1.0)],
            drift: vec![Coeff::native(|p| sin(p.x[0]) - p.u1 - p.u2)],
            running_payoff: [
                Coeff::native(|p| -(p.u1 * p.u1)),
                Coeff::native(|p| -2.0 * (p.u2 * p.u2)),
            ],
            terminal_payoff: [gauss_bump(-1.0), gauss_bump(1.0)],
            controls: [unit(), ControlSet::interval(-1.0, 1.0)?],
            structure: Structure::Separated,
            growth_exponent: 1.0,
            // max/min rather than clamp: same NaN handling as the DSL's clamp.
            #[allow(clippy::manual_clamp)]
            feedback_closed_form: Some([
                Coeff::native(|p| (-p.p1[0] / 2.0).max(0.0).min(1.0)),
                Coeff::native(|p| (-p.p2[0] / 4.0).max(-1.0).min(1.0)),
            ]),
        },
        "case2-bangbang" => GameSpec {
            name: name.into(),
            dim: 1,
            horizon: 1.0,
            sigma: vec![Coeff::constant(1.0)],
            drift: vec![Coeff::native(|p| {
                (1.0 + 0.5 * sin(p.x[0])) * p.u1 - (1.0 + 0.5 * cos(p.x[0])) * p.u2
            })],
            running_payoff: [
                Coeff::native(|p| -0.2 * p.u1),
                Coeff::native(|p| -0.2 * p.u2),
            ],
            terminal_payoff: [gauss_bump(1.0), gauss_bump(-1.0)],
            controls: [unit(), unit()],
            structure: Structure::AffineBangBang,
            growth_exponent: 1.0,
            feedback_closed_form: Some([
                Coeff::native(|p| {
                    heaviside_ramp(p.p1[0] * (1.0 + 0.5 * sin(p.x[0])) - 0.2, p.eps)
                }),
                Coeff::native(|p| {
                    heaviside_ramp(-p.p2[0] * (1.0 + 0.5 * cos(p.x[0])) - 0.2, p.eps)
                }),
            ]),
        },
        "case3-unbounded" => GameSpec {
            name: name.into(),
            dim: 1,
            horizon: 1.0,
            sigma: vec![Coeff::constant(1.0)],
            drift: vec![Coeff::native(|p| {
                let x = p.x[0];
                (1.0 + 0.1 * x) * p.u1 + (1.0 - 0.1 * x) * p.u2 + 0.5 * x
            })],
            running_payoff: [Coeff::constant(0.0), Coeff::constant(0.0)],
            terminal_payoff: [
                Coeff::native(|p| p.x[0] * p.x[0]),
                Coeff::native(|p| p.x[0] * p.x[0]),
            ],
            controls: [unit(), unit()],
            structure: Structure::AffineUnbounded,
            growth_exponent: 2.0,
            feedback_closed_form: Some([
                Coeff::native(|p| heaviside_ramp(p.p1[0] * (1.0 + 0.1 * p.x[0]), p.eps)),
                Coeff::native(|p| heaviside_ramp(p.p2[0] * (1.0 - 0.1 * p.x[0]), p.eps)),
            ]),
        },
        "heat-oracle" => GameSpec {
            name: name.into(),
            dim: 1,
            horizon: 1.0,
            sigma: vec![Coeff::constant(sqrt(2.0))],
            drift: vec![Coeff::constant(0.0)],
            running_payoff: [Coeff::constant(0.0), Coeff::constant(0.0)],
            terminal_payoff: [
                Coeff::native(|p| cos(p.x[0])),
                Coeff::native(|p| cos(p.x[0])),
            ],
            controls: [unit(), unit()],
            structure: Structure::Separated,
            growth_exponent: 1.0,
            feedback_closed_form: Some([Coeff::constant(0.0), Coeff::constant(0.0)]),
        },
        "linear-oracle" => GameSpec {
            name: name.into(),
            dim: 1,
            horizon: 1.0,
            sigma: vec![Coeff::constant(1.0)],
            drift: vec![Coeff::constant(0.0)],
            running_payoff: [Coeff::constant(0.0), Coeff::constant(0.0)],
            terminal_payoff: [Coeff::native(|p| p.x[0]), Coeff::native(|p| p.x[0])],
            controls: [unit(), unit()],
            structure: Structure::AffineUnbounded,
            growth_exponent: 1.0,
            feedback_closed_form: Some([Coeff::constant(0.0), Coeff::constant(0.0)]),
        },
        _ => return Err(unknown(name)),
    };
    spec.check()?;
    Ok(spec)
}

fn strings<const N: usize>(items: [&str; N]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn pair(a: &str, b: &str) -> [String; 2] {
    [a.to_string(), b.to_string()]
}

/// The same built-in games written in the coefficient DSL.
pub fn builtin_source(name: &str) -> Result<SpecSource, ModelError> {
    let unit = unit();
    let src = match name {
        "case1-continuous" => SpecSource {
            name: name.into(),
            dim: 1,
            horizon: 1.0,
            sigma: strings(["1"]),
            drift: strings(["sin(x1) - u1 - u2"]),
            running_payoff: pair("-u1^2", "-2*u2^2"),
            terminal_payoff: pair("exp(-(x1 + 1)^2)", "exp(-(x1 - 1)^2)"),
            controls: [unit.clone(), ControlSet::interval(-1.0, 1.0)?],
            structure: Structure::Separated,
            growth_exponent: 1.0,
            feedback: Some(pair("clamp(-p1/2, 0, 1)", "clamp(-p2/4, -1, 1)")),
        },
        "case2-bangbang" => SpecSource {
            name: name.into(),
            dim: 1,
            horizon: 1.0,
            sigma: strings(["1"]),
            drift: strings(["(1 + 0.5*sin(x1))*u1 - (1 + 0.5*cos(x1))*u2"]),
            running_payoff: pair("-0.2*u1", "-0.2*u2"),
            terminal_payoff: pair("exp(-(x1 - 1)^2)", "exp(-(x1 + 1)^2)"),
            controls: [unit.clone(), unit],
            structure: Structure::AffineBangBang,
            growth_exponent: 1.0,
            feedback: Some(pair(
                "heav_eps(p1*(1 + 0.5*sin(x1)) - 0.2, eps)",
                "heav_eps(-p2*(1 + 0.5*cos(x1)) - 0.2, eps)",
            )),
        },
        "case3-unbounded" => SpecSource {
            name: name.into(),
            dim: 1,
            horizon: 1.0,
            sigma: strings(["1"]),
            drift: strings(["(1 + 0.1*x1)*u1 + (1 - 0.1*x1)*u2 + 0.5*x1"]),
            running_payoff: pair("0", "0"),
            terminal_payoff: pair("x1^2", "x1^2"),
            controls: [unit.clone(), unit],
            structure: Structure::AffineUnbounded,
            growth_exponent: 2.0,
            feedback: Some(pair(
                "heav_eps(p1*(1 + 0.1*x1), eps)",
                "heav_eps(p2*(1 - 0.1*x1), eps)",
            )),
        },
        "heat-oracle" => SpecSource {
            name: name.into(),
            dim: 1,
            horizon: 1.0,
            sigma: strings(["sqrt(2)"]),
            drift: strings(["0"]),
            running_payoff: pair("0", "0"),
            terminal_payoff: pair("cos(x1)", "cos(x1)"),
            controls: [unit.clone(), unit],
            structure: Structure::Separated,
            growth_exponent: 1.0,
            feedback: Some(pair("0", "0")),
        },
        "linear-oracle" => SpecSource {
            name: name.into(),
            dim: 1,
            horizon: 1.0,
            sigma: strings(["1"]),
            drift: strings(["0"]),
            running_payoff: pair("0", "0"),
            terminal_payoff: pair("x1", "x1"),
            controls: [unit.clone(), unit],
            structure: Structure::AffineUnbounded,
            growth_exponent: 1.0,
            feedback: Some(pair("0", "0")),
        },
        _ => return Err(unknown(name)),
    };
    Ok(src)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Player, Point};

    #[test]
    fn unknown_name_lists_available() {
        let err = builtin_scenario("case4").unwrap_err();
        let msg = alloc::format!("{err}");
        for (name, _) in BUILTIN_SCENARIOS {
            assert!(msg.contains(name), "{msg}");
        }
        assert!(builtin_source("nope").is_err());
    }

    #[test]
    fn case1_feedback_formula() {
        let spec = builtin_scenario("case1-continuous").unwrap();
        let fb = spec.feedback_closed_form.as_ref().unwrap();
        let p = Point::at(0.3, &[0.2]).with_gradients(&[-4.0], &[2.0]);
        assert_eq!(fb[0].eval(&p), 1.0);
        assert_eq!(fb[1].eval(&p), -0.5);
        let p = Point::at(0.3, &[0.2]).with_gradients(&[1.0], &[-8.0]);
        assert_eq!(fb[0].eval(&p), 0.0);
        assert_eq!(fb[1].eval(&p), 1.0);
    }

    #[test]
    fn case2_feedback_is_heaviside_of_switching_argument() {
        let spec = builtin_scenario("case2-bangbang").unwrap();
        let fb = spec.feedback_closed_form.as_ref().unwrap();
        for &(x, p1, p2) in &[(0.3, 1.0, -2.0), (-1.0, 0.1, 0.1), (2.0, -0.5, -0.4)] {
            let pt = Point::at(0.0, &[x]).with_gradients(&[p1], &[p2]);
            for (player, pv) in [(Player::One, p1), (Player::Two, p2)] {
                let eta = spec.switching_argument(player, 0.0, &[x], &[pv]);
                let want = if eta > 0.0 { 1.0 } else { 0.0 };
                assert_eq!(fb[player.index()].eval(&pt), want);
            }
        }
    }

    #[test]
    fn heat_oracle_is_driftless_with_unit_diffusion() {
        let spec = builtin_scenario("heat-oracle").unwrap();
        assert_eq!(spec.drift_at(0.5, &[1.0], 1.0, 1.0)[0], 0.0);
        let s = spec.sigma_at(0.0, &[0.0])[0][0];
        assert!((0.5 * s * s - 1.0).abs() < 1e-15);
    }
}
