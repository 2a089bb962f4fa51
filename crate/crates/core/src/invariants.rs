//! Singularity arithmetic for nodal-cuspidal curves: dual degree, the
//! Plücker and genus formulas, moduli dimension and profile admissibility.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SingularProfile {
    pub d: i64,
    pub g: i64,
    pub delta: i64,
    pub kappa: i64,
}

impl SingularProfile {
    pub fn new(d: i64, g: i64, delta: i64, kappa: i64) -> Self {
        Self { d, g, delta, kappa }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Rule {
    GenusFormula,
    DualDegreeFloor,
    FormulaAgreement,
    Nonnegativity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Violation {
    pub rule: Rule,
    pub detail: String,
    /// Set for rules that encode a working floor rather than a theorem.
    pub heuristic: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProfileVerdict {
    pub profile: SingularProfile,
    pub admissible: bool,
    /// Absent for lines.
    pub dual_degree: Option<i64>,
    pub reasons: Vec<Violation>,
}

pub fn dual_degree(d: i64, g: i64, kappa: i64) -> Result<i64> {
    if d <= 1 {
        return Err(Error::validation("a line has no dual curve; degree must be at least 2"));
    }
    Ok(2 * d + 2 * g - 2 - kappa)
}

pub fn plucker_first(d: i64, delta: i64, kappa: i64) -> i64 {
    d * (d - 1) - 2 * delta - 3 * kappa
}

pub fn genus_nodal_cuspidal(d: i64, delta: i64, kappa: i64) -> Result<i64> {
    let g = (d - 1) * (d - 2) / 2 - delta - kappa;
    if g < 0 {
        return Err(Error::domain(format!("genus formula gives {g}; no such curve")));
    }
    Ok(g)
}

/// Real dimension of the moduli space of curves in a class `A` with
/// `A·A = self_intersection` and `c₁·A = chern_pairing`.
pub fn moduli_dimension(self_intersection: i64, chern_pairing: i64) -> i64 {
    self_intersection + chern_pairing
}

pub fn check_profile(p: SingularProfile) -> ProfileVerdict {
    let mut reasons = Vec::new();
    let mut push = |rule, detail: String, heuristic| reasons.push(Violation { rule, detail, heuristic });

    let formula_g = (p.d - 1) * (p.d - 2) / 2 - p.delta - p.kappa;
    if formula_g != p.g {
        push(Rule::GenusFormula, format!("genus formula gives {formula_g}, declared {}", p.g), false);
    }
    let dual = dual_degree(p.d, p.g, p.kappa).ok();
    let exempt = matches!((p.d, p.g), (1, 0) | (2, 0));
    if let Some(ds) = dual {
        if ds < 3 && !exempt {
            push(Rule::DualDegreeFloor, format!("dualDegree={ds} < 3"), true);
        }
        let other = plucker_first(p.d, p.delta, p.kappa);
        if other != ds {
            push(Rule::FormulaAgreement, format!("d(d-1)-2delta-3kappa={other} differs from dualDegree={ds}"), false);
        }
    } else if !exempt {
        push(Rule::DualDegreeFloor, format!("degree {} has no dual curve", p.d), true);
    }
    let neg: Vec<&str> = [("d", p.d < 1), ("g", p.g < 0), ("delta", p.delta < 0), ("kappa", p.kappa < 0)]
        .into_iter()
        .filter_map(|(n, bad)| bad.then_some(n))
        .collect();
    if !neg.is_empty() {
        push(Rule::Nonnegativity, format!("negative or zero count: {}", neg.join(",")), false);
    }
    ProfileVerdict { profile: p, admissible: reasons.is_empty(), dual_degree: dual, reasons }
}

/// Admissible genus-consistent nodal-cuspidal profiles of degree `d`,
/// ordered by `(g, delta, kappa)`.
pub fn enumerate_profiles(d: i64) -> Result<Vec<SingularProfile>> {
    if !(2..=12).contains(&d) {
        return Err(Error::validation("enumeration degree must lie in 2..=12"));
    }
    let pg = (d - 1) * (d - 2) / 2;
    let mut out = Vec::new();
    for g in 0..=pg {
        for delta in 0..=(pg - g) {
            let p = SingularProfile::new(d, g, delta, pg - g - delta);
            if check_profile(p).admissible {
                out.push(p);
            }
        }
    }
    Ok(out)
}

pub fn profiles_csv(profiles: &[SingularProfile]) -> String {
    let mut s = String::from("d,g,delta,kappa,dualDegree\n");
    for p in profiles {
        let ds = dual_degree(p.d, p.g, p.kappa).map(|x| x.to_string()).unwrap_or_default();
        s.push_str(&format!("{},{},{},{},{}\n", p.d, p.g, p.delta, p.kappa, ds));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_examples() {
        assert_eq!(dual_degree(5, 0, 5).unwrap(), 3);
        assert_eq!(dual_degree(3, 1, 0).unwrap(), 6);
        assert_eq!(dual_degree(2, 0, 0).unwrap(), 2);
        assert!(dual_degree(1, 0, 0).is_err());
        assert_eq!(plucker_first(3, 1, 0), 4);
        assert_eq!(dual_degree(3, 0, 0).unwrap(), 4);
        for k in 0..=5 {
            assert_eq!(plucker_first(5, 6 - k, k), 8 - k);
        }
        assert_eq!(genus_nodal_cuspidal(1, 0, 0).unwrap(), 0);
        assert_eq!(genus_nodal_cuspidal(5, 0, 0).unwrap(), 6);
        assert_eq!(genus_nodal_cuspidal(3, 1, 0).unwrap(), 0);
        assert!(genus_nodal_cuspidal(2, 1, 0).is_err());
        assert_eq!(moduli_dimension(1, 3), 4);
        assert_eq!(moduli_dimension(4, 6), 10);
        for d in 1..10 {
            assert_eq!(moduli_dimension(d * d, 3 * d), d * (d + 3));
        }
    }

    #[test]
    fn verdicts() {
        let v = check_profile(SingularProfile::new(5, 0, 1, 5));
        assert!(v.admissible && v.dual_degree == Some(3));
        let v = check_profile(SingularProfile::new(5, 0, 0, 6));
        assert!(!v.admissible);
        assert_eq!(v.reasons[0].rule, Rule::DualDegreeFloor);
        assert!(v.reasons[0].detail.contains("dualDegree=2 < 3") && v.reasons[0].heuristic);
        let v = check_profile(SingularProfile::new(2, 0, 1, 0));
        assert!(!v.admissible && v.reasons[0].detail.contains("-1"));
        assert!(check_profile(SingularProfile::new(1, 0, 0, 0)).admissible);
        assert!(check_profile(SingularProfile::new(2, 0, 0, 0)).admissible);
    }

    #[test]
    fn enumerations() {
        assert_eq!(enumerate_profiles(2).unwrap(), vec![SingularProfile::new(2, 0, 0, 0)]);
        let three = enumerate_profiles(3).unwrap();
        for p in [(1, 0, 0), (0, 1, 0), (0, 0, 1)] {
            assert!(three.contains(&SingularProfile::new(3, p.0, p.1, p.2)));
        }
        let quintics: Vec<_> = enumerate_profiles(5).unwrap().into_iter().filter(|p| p.g == 0).collect();
        assert_eq!(quintics.len(), 6);
        assert!(quintics.iter().all(|p| p.delta + p.kappa == 6 && p.kappa <= 5));
        assert!(enumerate_profiles(13).is_err() && enumerate_profiles(1).is_err());
        assert_eq!(profiles_csv(&three[..1]), "d,g,delta,kappa,dualDegree\n3,0,0,1,3\n");
    }
}
