//! Scenario files, presets and overrides.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use viscflow_core::domain::{BoundaryData, Domain, Space, Vec2};
use viscflow_core::eos::{EosKind, PressureLaw};
use viscflow_core::momentum::{DiscreteState, Model};
use viscflow_core::relative_energy::{manufactured_sources, Manufactured, StrongSolution};
use viscflow_core::rheology::{PotentialKind, ViscousPotential};

use crate::expr::Expr;
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub domain: DomainSpec,
    pub eos: EosSpec,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub boundary: BoundarySpec,
    /// Omitted initial data is taken from the reference solution at t = 0.
    #[serde(default)]
    pub initial: Option<InitialSpec>,
    pub numerics: Numerics,
    #[serde(default)]
    pub reference: Option<ReferenceSpec>,
    /// Inject the sources that make the reference an exact solution.
    #[serde(default = "yes")]
    pub inject_sources: bool,
    #[serde(default = "all_monitors")]
    pub monitors: Vec<Monitor>,
    #[serde(default)]
    pub output: Option<String>,
}

fn yes() -> bool {
    true
}

fn all_monitors() -> Vec<Monitor> {
    Monitor::ALL.to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub l1: f64,
    pub l2: f64,
}

impl Default for DomainSpec {
    fn default() -> Self {
        DomainSpec { l1: 1.0, l2: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EosSpec {
    Isentropic {
        a: f64,
        gamma: f64,
        #[serde(default)]
        a_lower: Option<f64>,
        #[serde(default)]
        a_upper: Option<f64>,
    },
    IsentropicLinear { a: f64, gamma: f64, b: f64, a_lower: f64, a_upper: f64 },
    Tabulated { samples: Vec<(f64, f64)>, a_lower: f64, a_upper: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Newtonian {
        mu: f64,
        eta: f64,
        #[serde(default)]
        delta: f64,
    },
    PPotential {
        mu0: f64,
        mu1: f64,
        p: f64,
        #[serde(default)]
        delta: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub u1: String,
    pub u2: String,
    pub rho: String,
}

impl Default for BoundarySpec {
    fn default() -> Self {
        BoundarySpec { u1: "0".into(), u2: "0".into(), rho: "1".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum InitialSpec {
    Velocity { rho: String, u1: String, u2: String },
    Momentum { rho: String, m1: String, m2: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    pub n: usize,
    pub m: usize,
    pub eps: f64,
    pub dt: f64,
    pub t_final: f64,
    #[serde(default)]
    pub picard_max: Option<usize>,
    #[serde(default)]
    pub picard_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSpec {
    /// ρ̃ = 1 + b cos t cos(πx/L₁) cos(πy/L₂), ũ from the first two sine modes.
    Manufactured { a: f64, b: f64 },
    Expressions { rho: String, u1: String, u2: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitor {
    Mass,
    Extrema,
    Renormalization,
    Energy,
    FenchelYoung,
    W1,
    W3,
    W5,
    Relative,
    Parabolic,
}

impl Monitor {
    pub const ALL: [Monitor; 10] = [
        Monitor::Mass,
        Monitor::Extrema,
        Monitor::Renormalization,
        Monitor::Energy,
        Monitor::FenchelYoung,
        Monitor::W1,
        Monitor::W3,
        Monitor::W5,
        Monitor::Relative,
        Monitor::Parabolic,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Monitor::Mass => "mass",
            Monitor::Extrema => "extrema",
            Monitor::Renormalization => "renormalization",
            Monitor::Energy => "energy",
            Monitor::FenchelYoung => "fenchel_young",
            Monitor::W1 => "w1",
            Monitor::W3 => "w3",
            Monitor::W5 => "w5",
            Monitor::Relative => "relative",
            Monitor::Parabolic => "parabolic",
        }
    }
}

/// Reference solution given by expressions in t, x1, x2.
#[derive(Debug, Clone)]
pub struct ExprSolution {
    pub rho: Expr,
    pub u1: Expr,
    pub u2: Expr,
}

impl StrongSolution for ExprSolution {
    fn rho(&self, t: f64, x: Vec2) -> f64 {
        self.rho.eval(t, x[0], x[1])
    }

    fn u(&self, t: f64, x: Vec2) -> Vec2 {
        [self.u1.eval(t, x[0], x[1]), self.u2.eval(t, x[0], x[1])]
    }
}

/// Everything a run needs, assembled and validated.
pub struct Built {
    pub model: Model,
    pub initial: DiscreteState,
    pub reference: Option<Arc<dyn StrongSolution>>,
    pub initial_energy: f64,
}

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::Invalid(msg.into())
}

fn parse(field: &str, src: &str) -> Result<Expr, HarnessError> {
    Expr::parse(src).map_err(|e| invalid(format!("{field}: {e}")))
}

impl EosSpec {
    pub fn build(&self) -> Result<PressureLaw, HarnessError> {
        let r = match self {
            EosSpec::Isentropic { a, gamma, a_lower, a_upper } => {
                let c = 1.0 / (gamma - 1.0);
                PressureLaw::with_constants(
                    EosKind::Isentropic { a: *a, gamma: *gamma },
                    a_lower.unwrap_or(c),
                    a_upper.unwrap_or(c),
                )
            }
            EosSpec::IsentropicLinear { a, gamma, b, a_lower, a_upper } => PressureLaw::with_constants(
                EosKind::IsentropicPlusLinear { a: *a, gamma: *gamma, b: *b },
                *a_lower,
                *a_upper,
            ),
            EosSpec::Tabulated { samples, a_lower, a_upper } => PressureLaw::tabulated(samples, *a_lower, *a_upper),
        };
        r.map_err(|e| invalid(format!("eos: {e}")))
    }
}

impl PotentialSpec {
    pub fn build(&self) -> Result<ViscousPotential, HarnessError> {
        let (kind, delta) = match *self {
            PotentialSpec::Newtonian { mu, eta, delta } => (PotentialKind::Newtonian { mu, eta }, delta),
            PotentialSpec::PPotential { mu0, mu1, p, delta } => (PotentialKind::PPotential { mu0, mu1, p }, delta),
        };
        ViscousPotential::new(kind, delta).map_err(|e| invalid(format!("potential: {e}")))
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| invalid(format!("scenario: {e}")))
    }

    /// A preset name or a path to a JSON file, with KEY=VALUE overrides applied.
    pub fn load(spec: &str, overrides: &[String]) -> Result<Self, HarnessError> {
        let mut v = if Path::new(spec).is_file() {
            let text = std::fs::read_to_string(spec)?;
            serde_json::from_str::<Value>(&text).map_err(|e| invalid(format!("{spec}: {e}")))?
        } else if let Some(p) = preset(spec) {
            serde_json::to_value(p).expect("presets serialize")
        } else {
            return Err(invalid(format!("`{spec}` is neither a file nor a preset ({})", PRESETS.join(", "))));
        };
        for o in overrides {
            apply_override(&mut v, o)?;
        }
        serde_json::from_value(v).map_err(|e| invalid(format!("scenario: {e}")))
    }

    pub fn wants(&self, m: Monitor) -> bool {
        self.monitors.contains(&m)
    }

    pub fn build(&self) -> Result<Built, HarnessError> {
        let nm = &self.numerics;
        for (k, v) in [("eps", nm.eps), ("dt", nm.dt)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("numerics.{k} must be positive, got {v}")));
            }
        }
        if !(nm.t_final >= 0.0 && nm.t_final.is_finite()) {
            return Err(invalid("numerics.t_final must be non-negative"));
        }
        let dom = Domain::new(self.domain.l1, self.domain.l2, nm.m).map_err(|e| invalid(format!("domain: {e}")))?;
        let law = self.eos.build()?;
        let pot = self.potential.build()?;

        let bu1 = parse("boundary.u1", &self.boundary.u1)?;
        let bu2 = parse("boundary.u2", &self.boundary.u2)?;
        let brho = parse("boundary.rho", &self.boundary.rho)?;
        for (k, e) in [("u1", &bu1), ("u2", &bu2), ("rho", &brho)] {
            if !e.is_steady() {
                return Err(invalid(format!("boundary.{k} must not depend on t")));
            }
        }
        let bc = BoundaryData::sample(&dom, |x, y| [bu1.eval(0.0, x, y), bu2.eval(0.0, x, y)], |x, y| brho.eval(0.0, x, y))
            .map_err(|e| invalid(format!("boundary: {e}")))?;
        let space = Space::new(dom, nm.n, bc).map_err(|e| invalid(format!("numerics: {e}")))?;

        let reference: Option<Arc<dyn StrongSolution>> = match &self.reference {
            None => None,
            Some(ReferenceSpec::Manufactured { a, b }) => Some(Arc::new(
                Manufactured::new(*a, *b, self.domain.l1, self.domain.l2).map_err(|e| invalid(format!("reference: {e}")))?,
            )),
            Some(ReferenceSpec::Expressions { rho, u1, u2 }) => Some(Arc::new(ExprSolution {
                rho: parse("reference.rho", rho)?,
                u1: parse("reference.u1", u1)?,
                u2: parse("reference.u2", u2)?,
            })),
        };

        let mut model = Model::new(space, law, pot, nm.eps).map_err(|e| invalid(e.to_string()))?;
        if let Some(k) = nm.picard_max {
            model.picard_max = k;
        }
        if let Some(t) = nm.picard_tol {
            model.picard_tol = t;
        }
        if let (Some(r), true) = (&reference, self.inject_sources) {
            let src = manufactured_sources(r.clone(), model.law.clone(), model.potential.clone(), nm.eps);
            model = model.with_sources(src);
        }

        let dom = &model.space.domain;
        let (rho0, u0): (Vec<f64>, Vec<Vec2>) = match (&self.initial, &reference) {
            (Some(InitialSpec::Velocity { rho, u1, u2 }), _) => {
                let (r, a, b) = (parse("initial.rho", rho)?, parse("initial.u1", u1)?, parse("initial.u2", u2)?);
                (0..dom.node_count())
                    .map(|k| {
                        let [x, y] = dom.coords(k);
                        (r.eval(0.0, x, y), [a.eval(0.0, x, y), b.eval(0.0, x, y)])
                    })
                    .unzip()
            }
            (Some(InitialSpec::Momentum { rho, m1, m2 }), _) => {
                let (r, a, b) = (parse("initial.rho", rho)?, parse("initial.m1", m1)?, parse("initial.m2", m2)?);
                let mut out = (Vec::new(), Vec::new());
                for k in 0..dom.node_count() {
                    let [x, y] = dom.coords(k);
                    let (rv, m) = (r.eval(0.0, x, y), [a.eval(0.0, x, y), b.eval(0.0, x, y)]);
                    let u = if rv > 0.0 {
                        [m[0] / rv, m[1] / rv]
                    } else if m == [0.0, 0.0] {
                        [0.0, 0.0]
                    } else {
                        return Err(invalid(format!("initial momentum nonzero on vacuum at ({x}, {y})")));
                    };
                    out.0.push(rv);
                    out.1.push(u);
                }
                out
            }
            (None, Some(r)) => (0..dom.node_count())
                .map(|k| {
                    let x = dom.coords(k);
                    (r.rho(0.0, x), r.u(0.0, x))
                })
                .unzip(),
            (None, None) => return Err(invalid("initial data missing and no reference solution to take it from")),
        };
        let mut energy = 0.0;
        for k in 0..dom.node_count() {
            let (r, u) = (rho0[k], u0[k]);
            if !(r.is_finite() && u[0].is_finite() && u[1].is_finite()) {
                let [x, y] = dom.coords(k);
                return Err(invalid(format!("initial data not finite at ({x}, {y})")));
            }
            if r < 0.0 {
                return Err(invalid(format!("initial density {r} is negative")));
            }
            energy += dom.weights[k] * (0.5 * r * (u[0] * u[0] + u[1] * u[1]) + model.law.pot(r));
        }
        if !energy.is_finite() {
            return Err(invalid("initial energy is not finite"));
        }
        let idx = |x: f64, y: f64| dom.idx((x / dom.hx).round() as usize, (y / dom.hy).round() as usize);
        let initial = model
            .initial_state(|x, y| rho0[idx(x, y)], |x, y| u0[idx(x, y)])
            .map_err(|e| invalid(format!("initial data: {e}")))?;
        Ok(Built { model, initial, reference, initial_energy: energy })
    }
}

/// Sets a dotted KEY inside the scenario JSON; VALUE is read as JSON, else as a string.
pub fn apply_override(v: &mut Value, kv: &str) -> Result<(), HarnessError> {
    let (key, val) = kv.split_once('=').ok_or_else(|| invalid(format!("override `{kv}` is not KEY=VALUE")))?;
    let val: Value = serde_json::from_str(val).unwrap_or_else(|_| Value::String(val.to_string()));
    let mut cur = v;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, p) in parts.iter().enumerate() {
        if p.is_empty() {
            return Err(invalid(format!("override key `{key}` has an empty segment")));
        }
        if !cur.is_object() {
            if cur.is_null() {
                *cur = Value::Object(Default::default());
            } else {
                return Err(invalid(format!("override key `{key}`: `{p}` is inside a non-object")));
            }
        }
        let obj = cur.as_object_mut().expect("checked above");
        if i + 1 == parts.len() {
            obj.insert(p.to_string(), val);
            return Ok(());
        }
        cur = obj.entry(p.to_string()).or_insert(Value::Null);
    }
    Ok(())
}

pub const PRESETS: [&str; 5] = ["rest", "box-diffusion", "channel", "compressive", "manufactured"];

fn gamma2() -> EosSpec {
    EosSpec::Isentropic { a: 1.0, gamma: 2.0, a_lower: None, a_upper: None }
}

fn newtonian() -> PotentialSpec {
    PotentialSpec::Newtonian { mu: 0.5, eta: 0.2, delta: 0.0 }
}

fn velocity(rho: &str, u1: &str, u2: &str) -> Option<InitialSpec> {
    Some(InitialSpec::Velocity { rho: rho.into(), u1: u1.into(), u2: u2.into() })
}

fn numerics(n: usize, m: usize, eps: f64, dt: f64, t_final: f64) -> Numerics {
    Numerics { n, m, eps, dt, t_final, picard_max: None, picard_tol: None }
}

pub fn preset(name: &str) -> Option<Scenario> {
    let base = |name: &str, initial, num| Scenario {
        name: name.into(),
        domain: DomainSpec::default(),
        eos: gamma2(),
        potential: newtonian(),
        boundary: BoundarySpec::default(),
        initial,
        numerics: num,
        reference: None,
        inject_sources: true,
        monitors: all_monitors(),
        output: None,
    };
    Some(match name {
        "rest" => base("rest", velocity("1", "0", "0"), numerics(4, 8, 0.1, 0.25, 1.0)),
        "box-diffusion" => base("box-diffusion", velocity("1 + 0.4*cos(pi*x1)", "0", "0"), numerics(2, 16, 0.01, 0.01, 0.1)),
        "channel" => Scenario {
            boundary: BoundarySpec { u1: "1".into(), u2: "0".into(), rho: "1".into() },
            ..base("channel", velocity("0.5", "1", "0"), numerics(8, 16, 0.05, 0.01, 0.2))
        },
        "compressive" => base(
            "compressive",
            velocity("1 + 0.2*x1*x2", "-2*sin(pi*x1)*sin(pi*x2)*(x1 - 0.5)", "-2*sin(pi*x1)*sin(pi*x2)*(x2 - 0.5)"),
            numerics(8, 16, 0.02, 0.01, 0.2),
        ),
        "manufactured" => Scenario {
            reference: Some(ReferenceSpec::Manufactured { a: 0.5, b: 0.3 }),
            ..base("manufactured", None, numerics(8, 16, 0.02, 0.05, 0.5))
        },
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_through_json() {
        for p in PRESETS {
            let s = preset(p).unwrap();
            let text = serde_json::to_string(&s).unwrap();
            assert_eq!(Scenario::from_json(&text).unwrap(), s);
        }
    }

    #[test]
    fn overrides_set_nested_keys() {
        let s = Scenario::load("channel", &["numerics.dt=0.005".into(), "boundary.rho=2*x2 + 1".into()]).unwrap();
        assert_eq!(s.numerics.dt, 0.005);
        assert_eq!(s.boundary.rho, "2*x2 + 1");
        let mut v = serde_json::json!({"a": 1});
        apply_override(&mut v, "b.c=[1,2]").unwrap();
        assert_eq!(v["b"]["c"][1], 2);
        assert!(apply_override(&mut v, "a.x=1").is_err());
        assert!(apply_override(&mut v, "novalue").is_err());
    }

    #[test]
    fn validation_rejects_bad_scenarios() {
        let bad = |o: &str| matches!(Scenario::load("rest", &[o.into()]).and_then(|s| s.build().map(|_| ())), Err(HarnessError::Invalid(_)));
        assert!(bad("numerics.dt=-1"));
        assert!(bad("boundary.u1=t"));
        assert!(bad("initial.rho=1 +"));
        assert!(bad("initial.rho=-1"));
        assert!(bad("initial=null"));
        assert!(bad("eos.gamma=0.5"));
        assert!(bad("numerics.n=1000"));
        assert!(bad("numerics.bogus=1"));
    }

    #[test]
    fn momentum_data_divides_by_density() {
        let mut s = preset("rest").unwrap();
        s.initial = Some(InitialSpec::Momentum { rho: "2".into(), m1: "sin(pi*x)*sin(pi*y)".into(), m2: "0".into() });
        s.numerics.n = 1;
        let b = s.build().unwrap();
        // the single mode is 2 sin sin e₁, so u = ½ sin sin e₁ projects to ¼
        assert!((b.initial.c[0] - 0.25).abs() < 1e-2, "{:?}", b.initial.c);
        s.initial = Some(InitialSpec::Momentum { rho: "0".into(), m1: "1".into(), m2: "0".into() });
        assert!(s.build().is_err());
    }
}
