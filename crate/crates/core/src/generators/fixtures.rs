//! Named generator fixtures: the four worked examples, a linear family with
//! closed-form solutions, the zero driver, and a deliberately broken driver.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use super::{norm, Assumption, CoefficientSet, Generator, TerminalCondition};
use crate::error::{BsdeError, Result};
use crate::grid::{time_fn, GridScheme, Horizon};

const NAMES: [&str; 7] = [
    "example1",
    "example2",
    "example3",
    "example4",
    "linear_oracle",
    "zero_driver",
    "broken_increasing",
];

/// A generator with its default terminal condition and horizon.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: String,
    pub generator: Generator,
    pub terminal: TerminalCondition,
    pub horizon: Horizon,
    pub scheme: GridScheme,
    /// Integrability exponent the fixture is meant to be solved in.
    pub p: f64,
    pub oracle: Option<LinearOracle>,
}

pub fn fixture_names() -> &'static [&'static str] {
    &NAMES
}

pub fn fixture(name: &str) -> Result<Fixture> {
    let f = match name {
        "example1" => Fixture {
            name: name.into(),
            generator: example1(),
            terminal: TerminalCondition::brownian(1),
            horizon: Horizon::Finite(1.0),
            scheme: GridScheme::Uniform,
            p: 2.0,
            oracle: None,
        },
        "example2" => Fixture {
            name: name.into(),
            generator: example2(),
            terminal: TerminalCondition::bounded(2),
            horizon: Horizon::Finite(4.0),
            scheme: GridScheme::Uniform,
            p: 2.0,
            oracle: None,
        },
        "example3" => Fixture {
            name: name.into(),
            generator: example3(),
            terminal: TerminalCondition::brownian(1),
            horizon: Horizon::Finite(1.0),
            scheme: GridScheme::Uniform,
            p: 1.0,
            oracle: None,
        },
        "example4" => Fixture {
            name: name.into(),
            generator: example4(),
            terminal: TerminalCondition::bounded(2),
            horizon: Horizon::Infinite,
            scheme: GridScheme::MappedAlgebraic,
            p: 1.0,
            oracle: None,
        },
        "linear_oracle" => LinearOracle::new(0.0, 0.5, 0.0, 1.0).fixture(),
        "zero_driver" => Fixture {
            name: name.into(),
            generator: zero_driver(),
            terminal: TerminalCondition::brownian(1),
            horizon: Horizon::Finite(1.0),
            scheme: GridScheme::Uniform,
            p: 2.0,
            oracle: Some(LinearOracle::new(0.0, 0.0, 0.0, 1.0)),
        },
        "broken_increasing" => Fixture {
            name: name.into(),
            generator: Generator::new(name, 1, 1, |_, y, _, _, out| out[0] = y[0])
                .with_claims(&[Assumption::H4]),
            terminal: TerminalCondition::brownian(1),
            horizon: Horizon::Finite(1.0),
            scheme: GridScheme::Uniform,
            p: 2.0,
            oracle: None,
        },
        _ => return Err(BsdeError::UnknownFixture(name.to_string())),
    };
    Ok(f)
}

const H1_TO_H5: [Assumption; 5] = [
    Assumption::H1,
    Assumption::H2,
    Assumption::H3,
    Assumption::H4,
    Assumption::H5,
];

/// `k = 1`: `|ln t|(-e^y + |y|) + |z|/t^{1/4} + |B_t|`.
pub fn example1() -> Generator {
    Generator::new("example1", 1, 1, |t, y, z, ctx, out| {
        out[0] = t.ln().abs() * (-y[0].exp() + y[0].abs()) + norm(z) / t.powf(0.25) + ctx.b_norm();
    })
    .with_coefficients(CoefficientSet::new(
        time_fn(|t: f64| t.ln().abs()),
        time_fn(|t: f64| t.powf(-0.25)),
    ))
    .with_claims(&H1_TO_H5)
}

/// `k = 2`: `t²e^{-t}(-y₁³ + y₂, -y₂⁵ - y₁) + (1+t²)^{-1/2}(|z₁|, |z₂|) + t²/(t⁴+1)(1, 1)`,
/// where `z₁, z₂` are the rows of `z`.
pub fn example2() -> Generator {
    Generator::new("example2", 2, 1, |t, y, z, _ctx, out| {
        let d = z.len() / 2;
        let a = t * t * (-t).exp();
        let b = 1.0 / (1.0 + t * t).sqrt();
        let c = t * t / (t.powi(4) + 1.0);
        out[0] = a * (-y[0].powi(3) + y[1]) + b * norm(&z[..d]) + c;
        out[1] = a * (-y[1].powi(5) - y[0]) + b * norm(&z[d..]) + c;
    })
    .with_coefficients(CoefficientSet::new(
        time_fn(|t: f64| t * t * (-t).exp()),
        time_fn(|t: f64| 1.0 / (1.0 + t * t).sqrt()),
    ))
    .with_claims(&H1_TO_H5)
}

/// `k = 1`: `t^{-1/3}(e^{-y}1_{y<=0} + (1-y²)1_{y>0}) + (t+1)t^{-1/4}(|z|² ∧ √|z|) + 1/(1+t⁴)`.
///
/// The `y`-part is nonincreasing, so `u ≡ 0`.
pub fn example3() -> Generator {
    Generator::new("example3", 1, 1, |t, y, z, _ctx, out| {
        let y = y[0];
        let drift = if y <= 0.0 { (-y).exp() } else { 1.0 - y * y };
        let nz = norm(z);
        out[0] = t.powf(-1.0 / 3.0) * drift
            + (t + 1.0) / t.powf(0.25) * (nz * nz).min(nz.sqrt())
            + 1.0 / (1.0 + t.powi(4));
    })
    .with_coefficients(
        CoefficientSet::new(
            time_fn(|_| 0.0),
            time_fn(|t: f64| 2.0 * (t + 1.0) / t.powf(0.25)),
        )
        .with_sublinear(time_fn(|t: f64| (t + 1.0) / t.powf(0.25)), 0.5),
    )
    .with_claims(&[
        Assumption::H1Prime,
        Assumption::H2,
        Assumption::H3,
        Assumption::H4,
        Assumption::H4Prime,
        Assumption::H5,
        Assumption::H6,
    ])
}

/// `k = 2`: `(1+t²)^{-1}(e^{-y₁} + 3y₂, -e^{y₂} - 3y₁) + e^{-t}(sin|z₁|, sin|z₂|) + (e^{-t} sin t, te^{-t})`.
///
/// The sublinear bound is declared with `γ = √2 e^{-t}` and `g_t ≡ 0`: the
/// vector `(sin|z₁|, sin|z₂|)` can reach norm `√2`, so `γ = e^{-t}` alone does
/// not cover small `α` when `k = 2`.
pub fn example4() -> Generator {
    Generator::new("example4", 2, 1, |t, y, z, _ctx, out| {
        let d = z.len() / 2;
        let a = 1.0 / (1.0 + t * t);
        let e = (-t).exp();
        out[0] = a * ((-y[0]).exp() + 3.0 * y[1]) + e * norm(&z[..d]).sin() + e * t.sin();
        out[1] = a * (-y[1].exp() - 3.0 * y[0]) + e * norm(&z[d..]).sin() + t * e;
    })
    .with_coefficients(
        CoefficientSet::new(
            time_fn(|t| 1.0 / (1.0 + t * t)),
            time_fn(|t: f64| (-t).exp()),
        )
        .with_sublinear(time_fn(|t: f64| SQRT_2 * (-t).exp()), 0.5),
    )
    .with_sublinear_process(std::sync::Arc::new(|_, _| 0.0))
    .with_claims(&[
        Assumption::H1Prime,
        Assumption::H2,
        Assumption::H3,
        Assumption::H4,
        Assumption::H5,
        Assumption::H6,
    ])
}

pub fn zero_driver() -> Generator {
    Generator::new("zero_driver", 1, 1, |_, _, _, _, out| out.fill(0.0))
        .with_claims(&[
            Assumption::H1,
            Assumption::H1Prime,
            Assumption::H2,
            Assumption::H3,
            Assumption::H4,
            Assumption::H4Prime,
            Assumption::H5,
        ])
}

/// `g(t,y,z) = a y + b z + c` with `ξ = B_T` (`k = d = 1`); the solution is
/// `y_t = e^{a(T-t)}(B_t + b(T-t)) + c(e^{a(T-t)} - 1)/a`, `z_t = e^{a(T-t)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearOracle {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub horizon: f64,
}

impl LinearOracle {
    pub fn new(a: f64, b: f64, c: f64, horizon: f64) -> Self {
        LinearOracle { a, b, c, horizon }
    }

    /// The five-member family used for fitting estimate constants.
    pub fn family() -> Vec<LinearOracle> {
        [
            (0.0, 0.5, 0.0),
            (-0.5, 0.5, 0.0),
            (0.5, 0.25, 0.5),
            (0.0, 1.0, 1.0),
            (-1.0, 0.25, 0.5),
        ]
        .into_iter()
        .map(|(a, b, c)| LinearOracle::new(a, b, c, 1.0))
        .collect()
    }

    fn growth(&self, s: f64) -> f64 {
        (self.a * s).exp()
    }

    /// `∫_0^s e^{a r} dr`.
    fn integrated_growth(&self, s: f64) -> f64 {
        if self.a == 0.0 {
            s
        } else {
            (self.a * s).exp_m1() / self.a
        }
    }

    pub fn y(&self, t: f64, b_t: f64) -> f64 {
        let s = self.horizon - t;
        self.growth(s) * (b_t + self.b * s) + self.c * self.integrated_growth(s)
    }

    pub fn z(&self, t: f64) -> f64 {
        self.growth(self.horizon - t)
    }

    pub fn y0(&self) -> f64 {
        self.y(0.0, 0.0)
    }

    pub fn generator(&self) -> Generator {
        let (a, b, c) = (self.a, self.b, self.c);
        Generator::new(
            format!("linear(a={a},b={b},c={c})"),
            1,
            1,
            move |_, y, z, _, out| out[0] = a * y[0] + b * z[0] + c,
        )
        .with_coefficients(CoefficientSet::new(
            time_fn(move |_| a.max(0.0)),
            time_fn(move |_| b.abs()),
        ))
        .with_claims(&H1_TO_H5)
    }

    pub fn fixture(&self) -> Fixture {
        Fixture {
            name: "linear_oracle".into(),
            generator: self.generator(),
            terminal: TerminalCondition::brownian(1),
            horizon: Horizon::Finite(self.horizon),
            scheme: GridScheme::Uniform,
            p: 2.0,
            oracle: Some(*self),
        }
    }
}
