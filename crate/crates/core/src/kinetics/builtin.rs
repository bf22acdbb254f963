use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use super::{KineticsConstants, KineticsSet, ReactionFn};
use crate::error::{Error, Result};
use crate::geometry::Point;

/// Builtin kinetics by name with default parameters.
pub fn builtin(name: &str) -> Result<KineticsSet> {
    parse_kinetics(name)
}

type Params = BTreeMap<String, f64>;

fn take(params: &mut Params, key: &str, default: f64) -> f64 {
    params.remove(key).unwrap_or(default)
}

/// Periodic modulation `a·(1 + amp·cos 2πy₁)`.
fn modulation(a: f64, amp: f64, what: &str) -> Result<Arc<dyn Fn(Point) -> f64 + Send + Sync>> {
    if !(a > 0.0) || !(amp.abs() < 1.0) {
        return Err(Error::InvalidConfig(format!("{what} needs a > 0 and |amp| < 1, got a = {a}, amp = {amp}")));
    }
    Ok(Arc::new(move |y: Point| a * (1.0 + amp * (2.0 * PI * y[0]).cos())))
}

#[derive(Default)]
struct Parts {
    volume: Option<([ReactionFn; 3], [bool; 3])>,
    surface: Option<(ReactionFn, bool)>,
    exchange: Option<(Arc<dyn Fn(f64) -> f64 + Send + Sync>, f64, f64)>,
    lambda: Option<f64>,
    growth: f64,
}

fn mm_triple(p: &mut Params, parts: &mut Parts) -> Result<()> {
    let (a0, amp, lambda) = (take(p, "a0", 1.0), take(p, "a0_amp", 0.0), take(p, "lambda", 1.0));
    let m = modulation(a0, amp, "a0")?;
    let f: ReactionFn = Arc::new(move |y, s: [f64; 3]| {
        let [a, b, c] = s;
        let den = 1.0 + a.abs() + b.abs() + c.abs() + (a * b).abs() + (a * c).abs() + (b * c).abs() + (a * b * c).abs();
        m(y) * a * b * c / den
    });
    let dep = amp != 0.0;
    parts.volume = Some(([f.clone(), f.clone(), f], [dep; 3]));
    parts.lambda = Some(parts.lambda.unwrap_or(0.0).max(lambda));
    parts.growth = parts.growth.max(a0 * (1.0 + amp.abs()) / lambda);
    Ok(())
}

fn mm_mixed(p: &mut Params, parts: &mut Parts) -> Result<()> {
    let (a0, amp0) = (take(p, "a0", 1.0), take(p, "a0_amp", 0.0));
    let (a, amp) = (take(p, "a", 1.0), take(p, "a_amp", 0.0));
    let lambda = take(p, "lambda", 1.0);
    let m0 = modulation(a0, amp0, "a0")?;
    let ma = modulation(a, amp, "a")?;
    let f1: ReactionFn = Arc::new(move |y, [s1, s2, s3]: [f64; 3]| {
        m0(y) * s1 * s2 / (1.0 + s1.abs() + s2.abs() + (s1 * s2).abs() + (s1 * s2 * s3).abs()) + s1
    });
    let f2: ReactionFn = Arc::new(|_, [s1, s2, s3]: [f64; 3]| {
        s2 * s3 / (1.0 + s2.abs() + s3.abs() + (s2 * s3).abs() + (s1 * s2 * s3).abs())
    });
    let f3: ReactionFn = Arc::new(|_, [s1, s2, s3]: [f64; 3]| {
        s1 * s3 / (1.0 + s1.abs() + s3.abs() + (s1 * s3).abs() + (s1 * s2 * s3).abs()) + s3
    });
    let g3: ReactionFn = Arc::new(move |y, [s1, _, s3]: [f64; 3]| {
        let q = s1.powi(4);
        ma(y) * q / (1.0 + q) * s3 + s3
    });
    parts.volume = Some(([f1, f2, f3], [amp0 != 0.0, false, false]));
    parts.surface = Some((g3, amp != 0.0));
    parts.lambda = Some(parts.lambda.unwrap_or(0.0).max(lambda));
    let a0max = a0 * (1.0 + amp0.abs());
    let amax = a * (1.0 + amp.abs());
    parts.growth = parts.growth.max((a0max / lambda + 1.0).max(1.0 / lambda + 1.0)).max(amax + 1.0);
    Ok(())
}

fn langmuir(p: &mut Params, parts: &mut Parts) -> Result<()> {
    let (a, b) = (take(p, "a", 1.0), take(p, "b", 1.0));
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidConfig(format!("langmuir needs a, b > 0, got a = {a}, b = {b}")));
    }
    // positive part keeps H ≥ 0 for negative arguments
    let h = Arc::new(move |s: f64| {
        let sp = s.max(0.0);
        a * sp / (1.0 + b * sp)
    });
    parts.exchange = Some((h, a / b, a));
    Ok(())
}

/// `H(s) = a·s`: bounded only on the invariant region, so validation flags it.
fn linear_exchange(p: &mut Params, parts: &mut Parts) -> Result<()> {
    let a = take(p, "a", 1.0);
    if !(a > 0.0) {
        return Err(Error::InvalidConfig(format!("linear_exchange needs a > 0, got {a}")));
    }
    let lambda = parts.lambda.unwrap_or(1.0);
    parts.exchange = Some((Arc::new(move |s: f64| a * s), a * lambda, a));
    Ok(())
}

/// `F_species = value`, independent of the state.
fn constant_source(p: &mut Params, parts: &mut Parts) -> Result<()> {
    let value = take(p, "value", -1.0);
    let species = take(p, "species", 1.0);
    if !(species == 1.0 || species == 2.0 || species == 3.0) || !value.is_finite() {
        return Err(Error::InvalidConfig(format!("constant_source needs species in 1..=3, got {species}")));
    }
    let zero: ReactionFn = Arc::new(|_, _| 0.0);
    let mut v = [zero.clone(), zero.clone(), zero];
    v[species as usize - 1] = Arc::new(move |_, _| value);
    parts.volume = Some((v, [false; 3]));
    parts.growth = parts.growth.max(value.abs() / parts.lambda.unwrap_or(1.0));
    Ok(())
}

/// Parses `name[:key=value,...]` terms joined by `+`, e.g. `mm_triple+langmuir:a=1,b=1`.
///
/// Names: `zero`, `mm_triple`, `mm_mixed`, `langmuir` (alias `langmuir_exchange`),
/// `linear_exchange` and `constant_source`. Each
/// component (volume, surface, exchange) may be supplied by at most one term.
pub fn parse_kinetics(spec: &str) -> Result<KineticsSet> {
    let mut parts = Parts::default();
    let mut names = Vec::new();
    for term in spec.split('+') {
        let term = term.trim();
        let (name, args) = term.split_once(':').unwrap_or((term, ""));
        let name = name.trim().to_ascii_lowercase();
        let mut params = Params::new();
        for kv in args.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("kinetics parameter '{kv}' is not key=value")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("kinetics parameter '{kv}' is not numeric")))?;
            params.insert(k.trim().to_ascii_lowercase(), v);
        }
        let before = (parts.volume.is_some(), parts.surface.is_some(), parts.exchange.is_some());
        match name.as_str() {
            "zero" => {}
            "mm_triple" => {
                if before.0 {
                    return Err(Error::InvalidConfig("volume kinetics given twice".into()));
                }
                mm_triple(&mut params, &mut parts)?
            }
            "mm_mixed" => {
                if before.0 || before.1 {
                    return Err(Error::InvalidConfig("volume or surface kinetics given twice".into()));
                }
                mm_mixed(&mut params, &mut parts)?
            }
            "langmuir" | "langmuir_exchange" | "linear_exchange" => {
                if before.2 {
                    return Err(Error::InvalidConfig("exchange kinetics given twice".into()));
                }
                if name == "linear_exchange" {
                    linear_exchange(&mut params, &mut parts)?
                } else {
                    langmuir(&mut params, &mut parts)?
                }
            }
            "constant_source" => {
                if before.0 {
                    return Err(Error::InvalidConfig("volume kinetics given twice".into()));
                }
                constant_source(&mut params, &mut parts)?
            }
            _ => return Err(Error::UnknownName(name)),
        }
        if let Some(k) = params.keys().next() {
            return Err(Error::InvalidConfig(format!("unknown parameter '{k}' for kinetics '{name}'")));
        }
        names.push(term.to_ascii_lowercase());
    }
    let mut k = KineticsSet::zero();
    k.name = names.join("+");
    if let Some((v, dep)) = parts.volume {
        k.volume = v;
        k.y_dependent[..3].copy_from_slice(&dep);
    }
    if let Some((g, dep)) = parts.surface {
        k.surface = g;
        k.y_dependent[3] = dep;
    }
    let (mut l, mut lip) = (0.0, 0.0);
    if let Some((h, bound, lipschitz)) = parts.exchange {
        k.exchange = h;
        l = bound;
        lip = lipschitz;
    }
    k.constants = KineticsConstants {
        exchange_bound: l,
        exchange_lipschitz: lip,
        lambda: parts.lambda.unwrap_or(1.0),
        growth: parts.growth.max(1.0),
    };
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn langmuir_value() {
        let k = builtin("langmuir_exchange:a=1,b=1").unwrap();
        assert!((k.h(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(k.h(-1.0), 0.0);
        assert_eq!(k.constants.exchange_bound, 1.0);
        assert_eq!(k.constants.exchange_lipschitz, 1.0);
    }

    #[test]
    fn triple_michaelis_menten_at_ones() {
        let k = builtin("MM_TRIPLE").unwrap();
        for i in 0..3 {
            assert!((k.f(i, [0.3, 0.3], [1.0; 3]) - 0.125).abs() < 1e-15);
        }
        assert_eq!(k.g3([0.0; 2], [1.0; 3]), 0.0);
        assert_eq!(k.h(1.0), 0.0);
    }

    #[test]
    fn mixed_example_values() {
        let k = builtin("mm_mixed").unwrap();
        let s = [1.0, 1.0, 1.0];
        assert!((k.f(0, [0.0; 2], s) - (1.0 / 5.0 + 1.0)).abs() < 1e-15);
        assert!((k.f(1, [0.0; 2], s) - 0.2).abs() < 1e-15);
        assert!((k.f(2, [0.0; 2], s) - 1.2).abs() < 1e-15);
        assert!((k.g3([0.0; 2], s) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn composition_and_errors() {
        let k = parse_kinetics("mm_triple + langmuir:a=2,b=4").unwrap();
        assert_eq!(k.name, "mm_triple+langmuir:a=2,b=4");
        assert!((k.h(1.0) - 0.4).abs() < 1e-15);
        assert_eq!(k.constants.exchange_bound, 0.5);
        assert!(matches!(parse_kinetics("michaelis"), Err(Error::UnknownName(_))));
        assert!(matches!(parse_kinetics("langmuir:c=1"), Err(Error::InvalidConfig(_))));
        assert!(matches!(parse_kinetics("langmuir:a=x"), Err(Error::InvalidConfig(_))));
        assert!(matches!(parse_kinetics("langmuir+langmuir"), Err(Error::InvalidConfig(_))));
        assert!(matches!(parse_kinetics("langmuir:a=-1"), Err(Error::InvalidConfig(_))));
        assert!(matches!(parse_kinetics("mm_triple:a0_amp=1.5"), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn zero_is_zero() {
        let k = builtin("zero").unwrap();
        for i in 0..3 {
            assert_eq!(k.f(i, [0.1, 0.2], [1.0, -2.0, 3.0]), 0.0);
        }
        assert_eq!(k.g3([0.1, 0.2], [1.0, 2.0, 3.0]), 0.0);
        assert_eq!(k.h(5.0), 0.0);
    }
}
