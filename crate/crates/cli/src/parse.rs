use elliptic_core::invariants::SingularProfile;
use elliptic_core::taming::TwoForm;
use elliptic_core::Complex64 as C64;

/// Parses `a`, `bi`, `a+bi`, `a-bi` (also with `j`), independent of locale.
pub fn complex(s: &str) -> Result<C64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("cannot parse `{s}` as a complex number");
    if t.is_empty() {
        return Err(bad());
    }
    let z = match t.strip_suffix('i').or_else(|| t.strip_suffix('j')) {
        None => C64::new(t.parse::<f64>().map_err(|_| bad())?, 0.0),
        Some(body) => split_parts(body).ok_or_else(bad)?,
    };
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(bad())
    }
}

fn split_parts(body: &str) -> Option<C64> {
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let imag = |x: &str| match x {
        "" | "+" => Some(1.0),
        "-" => Some(-1.0),
        _ => x.parse::<f64>().ok(),
    };
    match split {
        Some(k) => Some(C64::new(body[..k].parse::<f64>().ok()?, imag(&body[k..])?)),
        None => Some(C64::new(0.0, imag(body)?)),
    }
}

pub fn profile(s: &str) -> Result<SingularProfile, String> {
    let parts: Vec<i64> = s
        .split(',')
        .map(|p| p.trim().parse::<i64>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("profile `{s}` must be four integers d,g,delta,kappa"))?;
    match parts[..] {
        [d, g, delta, kappa] => Ok(SingularProfile::new(d, g, delta, kappa)),
        _ => Err(format!("profile `{s}` must be four integers d,g,delta,kappa")),
    }
}

/// `standard`, `split`, or six coefficients in the order 12,13,14,23,24,34.
pub fn two_form(s: &str) -> Result<TwoForm, String> {
    match s {
        "standard" => Ok(TwoForm::standard()),
        "split" => Ok(TwoForm([1.0, 0.0, 0.0, 0.0, 0.0, -1.0])),
        _ => {
            let v: Vec<f64> = s
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| format!("form `{s}` must be `standard`, `split` or six numbers"))?;
            let arr: [f64; 6] = v.try_into().map_err(|_| format!("form `{s}` needs six coefficients"))?;
            Ok(TwoForm(arr))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_forms() {
        assert_eq!(complex("1+0i").unwrap(), C64::new(1.0, 0.0));
        assert_eq!(complex("-0.5-2i").unwrap(), C64::new(-0.5, -2.0));
        assert_eq!(complex("2i").unwrap(), C64::new(0.0, 2.0));
        assert_eq!(complex("-i").unwrap(), C64::new(0.0, -1.0));
        assert_eq!(complex("1e-3+1E+2i").unwrap(), C64::new(1e-3, 100.0));
        assert_eq!(complex(" 3 ").unwrap(), C64::new(3.0, 0.0));
        assert!(complex("1,5").is_err() && complex("").is_err() && complex("nan").is_err());
    }

    #[test]
    fn profiles_and_forms() {
        assert_eq!(profile("5,0,0,6").unwrap(), SingularProfile::new(5, 0, 0, 6));
        assert!(profile("5,0,0").is_err());
        assert_eq!(two_form("split").unwrap().0[5], -1.0);
        assert!(two_form("1,2").is_err());
    }

    proptest::proptest! {
        #[test]
        fn complex_roundtrip(re in -1e6..1e6f64, im in -1e6..1e6f64) {
            let z = C64::new(re, im);
            let text = format!("{:.16e}{:+.16e}i", z.re, z.im);
            proptest::prop_assert_eq!(complex(&text).unwrap(), z);
            proptest::prop_assert_eq!(complex(&format!("{}", z.re)).unwrap(), C64::new(z.re, 0.0));
        }
    }
}
