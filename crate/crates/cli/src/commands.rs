use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use elliptic_core::curve_solver::{picard_solve, solve_with_radius_policy, Jet};
use elliptic_core::duality::nonlinearity_certificate;
use elliptic_core::elliptic_fiber::{
    audit_ellipticity_with_margin, audit_twisted_properties, fixed_point, retract_to_linear, FiberMap,
    IterationControls, DEFAULT_MARGIN,
};
use elliptic_core::elliptic_field::{germ_at, graph_plane, Example5, FieldDef};
use elliptic_core::grassmann4::Vec3;
use elliptic_core::invariants::{check_profile, enumerate_profiles, profiles_csv, SingularProfile};
use elliptic_core::schema::{AuditSettings, JetSpec, SolveSettings, StructureDocument};
use elliptic_core::taming::{crofton_counts, crofton_pairing, taming_check, LineSampler, SurfacePatch, TwoForm};
use elliptic_core::{Complex64 as C64, Error};

use crate::report::fmt17;
use crate::{parse, CmdResult, Common, Failure, Format};

pub struct Outcome {
    pub args: Value,
    pub input: Value,
    pub seed: Option<u64>,
    pub payload: Value,
    pub warnings: Vec<String>,
    pub csv: Option<String>,
    pub default_format: Format,
}

impl Outcome {
    fn json<A: Serialize, P: Serialize>(args: &A, input: Value, seed: Option<u64>, payload: &P) -> Self {
        Outcome {
            args: serde_json::to_value(args).expect("arguments serialize"),
            input,
            seed,
            payload: serde_json::to_value(payload).expect("payloads serialize"),
            warnings: Vec::new(),
            csv: None,
            default_format: Format::Json,
        }
    }
}

fn read_input(common: &Common) -> CmdResult<Option<(String, Value)>> {
    let Some(path) = &common.input else { return Ok(None) };
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::Core(Error::validation(format!("{}: {e}", path.display()))))?;
    Ok(Some((text, value)))
}

fn read_document(common: &Common) -> CmdResult<Option<(StructureDocument, Value)>> {
    match read_input(common)? {
        None => Ok(None),
        Some((text, value)) => Ok(Some((StructureDocument::parse(&text)?, value))),
    }
}

fn default_fiber_center() -> Vec3 {
    Vec3::new(0.3, -0.5, 0.8)
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct AuditArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub seed: u64,
    /// Samples for the twisted-structure audit.
    #[arg(long)]
    pub n: Option<usize>,
    /// Icosahedral refinement level of the ellipticity grid.
    #[arg(long)]
    pub resolution: Option<u32>,
}

pub fn audit(a: &AuditArgs) -> CmdResult<Outcome> {
    let doc = read_document(&a.common)?;
    let (fiber, settings, input) = match &doc {
        Some((d, v)) => (d.fiber_map()?, d.audit.clone().unwrap_or_default(), v.clone()),
        None => (FiberMap::standard(), AuditSettings::default(), Value::Null),
    };
    let resolution = a.resolution.or(settings.resolution).unwrap_or(4);
    let samples = a.n.or(settings.samples).unwrap_or(1000);
    if samples == 0 {
        return Err(Error::validation("--n must be positive").into());
    }
    let ell = audit_ellipticity_with_margin(&fiber, resolution, settings.margin.unwrap_or(DEFAULT_MARGIN))?;
    let tw = audit_twisted_properties(&fiber, samples, a.seed);
    let pass = ell.pass && tw.pass();
    let mut out = Outcome::json(a, input, Some(a.seed), &json!({ "ellipticity": ell, "twisted": tw, "pass": pass }));
    out.warnings.extend(ell.diagnostics.iter().cloned());
    let mut csv = String::from("property,pass,worst\n");
    csv.push_str(&format!("ellipticity,{},{}\n", ell.pass, fmt17(ell.lip_estimate)));
    for p in &tw.properties {
        csv.push_str(&format!("\"{}\",{},{}\n", p.name, p.pass, fmt17(p.worst)));
    }
    out.csv = Some(csv);
    Ok(out)
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    /// Grid size (odd, 17..=257).
    #[arg(long, default_value_t = 65)]
    pub n: usize,
    /// Disk radius; without it the radius starts at half the germ domain and
    /// is halved on failure.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Value and slope of the jet, `v,s`, when the document has no solve block.
    #[arg(long)]
    pub jet: Option<String>,
}

pub fn solve(a: &SolveArgs) -> CmdResult<Outcome> {
    let doc = read_document(&a.common)?;
    let (field, settings, input) = match &doc {
        Some((d, v)) => (d.field_def()?, d.solve.clone(), v.clone()),
        None => (FieldDef::Standard, None, Value::Null),
    };
    let mut settings = settings.unwrap_or(SolveSettings {
        point: [C64::new(0.0, 0.0); 2],
        slope: C64::new(0.0, 0.0),
        jet: JetSpec { value: C64::new(0.0, 0.0), slope: C64::new(1.0, 0.0), higher: Vec::new() },
        radius: None,
    });
    if let Some(j) = &a.jet {
        let parts: Vec<&str> = j.split(',').collect();
        let [v, s] = parts[..] else {
            return Err(Failure::Usage("--jet takes `value,slope`".into()));
        };
        settings.jet.value = parse::complex(v).map_err(Failure::Usage)?;
        settings.jet.slope = parse::complex(s).map_err(Failure::Usage)?;
    }
    let q = (settings.point[0], settings.point[1]);
    let plane = graph_plane(settings.slope, field.h_field(q, settings.slope)?)?;
    let germ = germ_at(&field, q, &plane)?;
    let jet = Jet::new(settings.jet.value, settings.jet.slope).with_higher(settings.jet.higher.clone());
    let (f, trace) = match a.radius.or(settings.radius) {
        Some(r) => picard_solve(&germ, &jet, r, a.n)?,
        None => solve_with_radius_policy(&germ, &jet, a.n)?,
    };
    let center = f.interpolate(C64::new(0.0, 0.0))?;
    let payload = json!({ "trace": trace, "valueAtCenter": center, "germIsZero": germ.is_zero() });
    let mut out = Outcome::json(a, input, None, &payload);
    if trace.radius_halvings > 0 {
        out.warnings.push(format!("radius halved {} times", trace.radius_halvings));
    }
    out.csv = Some(f.to_csv());
    Ok(out)
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DualArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 0.2)]
    pub coefficient: f64,
    /// Parameter α, e.g. `1+0i`; repeat for a sweep.
    #[arg(long)]
    pub alpha: Vec<String>,
    /// Sweep `n` equally spaced unit α instead.
    #[arg(long)]
    pub n: Option<usize>,
}

pub fn dual(a: &DualArgs) -> CmdResult<Outcome> {
    let alphas: Vec<C64> = match (a.alpha.is_empty(), a.n) {
        (false, None) => a.alpha.iter().map(|s| parse::complex(s)).collect::<Result<_, _>>().map_err(Failure::Usage)?,
        (true, Some(0)) => return Err(Error::validation("--n must be positive").into()),
        (true, Some(n)) => (0..n).map(|k| C64::from_polar(1.0, std::f64::consts::TAU * k as f64 / n as f64)).collect(),
        (true, None) => vec![C64::new(1.0, 0.0)],
        (false, Some(_)) => return Err(Failure::Usage("--alpha and --n are exclusive".into())),
    };
    let certs = alphas
        .iter()
        .map(|&al| nonlinearity_certificate(a.coefficient, al))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Outcome::json(a, Value::Null, None, &json!({ "certificates": certs }));
    let mut csv = String::from("re_alpha,im_alpha,re_v,im_v,re_w,im_w,separation\n");
    for c in &certs {
        out.warnings.extend(c.warnings.iter().cloned());
        csv.push_str(
            &[c.alpha.re, c.alpha.im, c.v.re, c.v.im, c.w.re, c.w.im, c.separation]
                .map(fmt17)
                .join(","),
        );
        csv.push('\n');
    }
    out.csv = Some(csv);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Standard,
    Example5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatchChoice {
    /// The complex line z = 0.2.
    Line,
    /// The same line with reversed orientation.
    ReversedLine,
    /// The conic w = z².
    Conic,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CroftonArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = Family::Standard)]
    pub family: Family,
    /// Built-in patch, ignored when `--input` supplies one.
    #[arg(long, value_enum, default_value_t = PatchChoice::Line)]
    pub patch: PatchChoice,
    /// Coefficient of the example field for `--family example5`.
    #[arg(long)]
    pub coefficient: Option<f64>,
}

pub fn crofton(a: &CroftonArgs) -> CmdResult<Outcome> {
    let (patch, input) = match read_input(&a.common)? {
        Some((text, v)) => (
            serde_json::from_str::<SurfacePatch>(&text).map_err(|e| Error::validation(format!("surface patch: {e}")))?,
            v,
        ),
        None => {
            let z = |re| C64::new(re, 0.0);
            let p = match a.patch {
                PatchChoice::Line => SurfacePatch::vertical_line(z(0.2), 1.5),
                PatchChoice::ReversedLine => SurfacePatch::vertical_line(z(0.2), 1.5).reversed(),
                PatchChoice::Conic => SurfacePatch::polynomial_graph(vec![z(0.0), z(0.0), z(1.0)], 1.5),
            };
            (p, Value::Null)
        }
    };
    let sampler = match a.family {
        Family::Standard => {
            if a.coefficient.is_some() {
                return Err(Failure::Usage("--coefficient applies to --family example5".into()));
            }
            LineSampler::standard()
        }
        Family::Example5 => {
            let mut e = Example5::default();
            if let Some(c) = a.coefficient {
                if !(0.0..=0.2).contains(&c) {
                    return Err(Error::validation("coefficient must lie in [0, 1/5]").into());
                }
                e.coefficient = c;
            }
            LineSampler::Example5Disk { field: e }
        }
    };
    let est = crofton_pairing(&patch, &sampler, a.n, a.seed)?;
    let mut out = Outcome::json(a, input, Some(a.seed), &json!({ "estimate": est, "sampler": sampler, "patch": patch }));
    if est.rejected > 0 {
        out.warnings.push(format!("{} tangential draws were rejected and redrawn", est.rejected));
    }
    if a.common.format == Some(Format::Csv) {
        let (counts, _) = crofton_counts(&patch, &sampler, a.n, a.seed)?;
        let mut csv = String::from("sample,count\n");
        for (k, c) in counts.iter().enumerate() {
            csv.push_str(&format!("{k},{c}\n"));
        }
        out.csv = Some(csv);
    }
    Ok(out)
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TamingArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// `standard`, `split`, or six coefficients in the order 12,13,14,23,24,34.
    #[arg(long, default_value = "standard")]
    pub form: String,
}

pub fn taming(a: &TamingArgs) -> CmdResult<Outcome> {
    let form: TwoForm = parse::two_form(&a.form).map_err(Failure::Usage)?;
    let (field, input) = match read_document(&a.common)? {
        Some((d, v)) => (d.field_def()?, v),
        None => (FieldDef::Standard, Value::Null),
    };
    let rep = taming_check(&field, &form, a.n, a.seed)?;
    let mut out = Outcome::json(a, input, Some(a.seed), &rep);
    if !rep.pass {
        out.warnings.push(format!("form is not positive on every sampled plane (min {:.6e})", rep.min));
    }
    Ok(out)
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PluckerArgs {
    #[command(flatten)]
    pub common: Common,
    /// `d,g,delta,kappa`.
    #[arg(long, conflicts_with = "enumerate")]
    pub profile: Option<String>,
    /// Degree to enumerate (2..=12).
    #[arg(long)]
    pub enumerate: Option<i64>,
}

pub fn plucker(a: &PluckerArgs) -> CmdResult<Outcome> {
    match (&a.profile, a.enumerate) {
        (Some(p), None) => {
            let p: SingularProfile = parse::profile(p).map_err(Failure::Usage)?;
            let mut out = Outcome::json(a, Value::Null, None, &check_profile(p));
            let v = check_profile(p);
            out.csv = Some(format!(
                "d,g,delta,kappa,dualDegree,admissible\n{},{},{},{},{},{}\n",
                p.d,
                p.g,
                p.delta,
                p.kappa,
                v.dual_degree.map(|x| x.to_string()).unwrap_or_default(),
                v.admissible
            ));
            Ok(out)
        }
        (None, Some(d)) => {
            let list = enumerate_profiles(d)?;
            let mut out = Outcome::json(a, Value::Null, None, &json!({ "degree": d, "profiles": list }));
            out.csv = Some(profiles_csv(&list));
            out.default_format = Format::Csv;
            Ok(out)
        }
        _ => Err(Failure::Usage("give exactly one of --profile, --enumerate".into())),
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct RetractArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of equally spaced parameters in [0, 1].
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub resolution: u32,
}

pub fn retract(a: &RetractArgs) -> CmdResult<Outcome> {
    if a.n < 2 {
        return Err(Error::validation("--n must be at least 2").into());
    }
    let (fiber, input) = match read_document(&a.common)? {
        Some((d, v)) => (d.fiber_map()?, v),
        None => (FiberMap::with_lipschitz(default_fiber_center(), 0.5)?, Value::Null),
    };
    let (center, _) = fixed_point(&fiber, IterationControls { max_iterations: 2000, tolerance: 1e-14 })?;
    let mut steps = Vec::new();
    let mut csv = String::from("t,lipEstimate,fdLipEstimate,pass\n");
    for k in 0..a.n {
        let t = k as f64 / (a.n - 1) as f64;
        let h = retract_to_linear(&fiber, t)?;
        let rep = audit_ellipticity_with_margin(&h, a.resolution, DEFAULT_MARGIN)?;
        csv.push_str(&format!("{},{},{},{}\n", fmt17(t), fmt17(rep.lip_estimate), fmt17(rep.fd_lip_estimate), rep.pass));
        steps.push(json!({ "t": t, "ellipticity": rep }));
    }
    let all_pass = steps.iter().all(|s| s["ellipticity"]["pass"] == json!(true));
    let mut out = Outcome::json(a, input, None, &json!({ "center": center, "steps": steps, "pass": all_pass }));
    out.csv = Some(csv);
    Ok(out)
}
