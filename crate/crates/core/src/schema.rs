//! Versioned JSON documents describing a fiber or a field, with optional
//! audit and solve settings. Unknown keys are rejected at every level.

use nalgebra::{Matrix3, Rotation3, Unit};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::elliptic_fiber::{retract_to_linear, FiberMap, SampledFiber};
use crate::elliptic_field::FieldDef;
use crate::error::{Error, Result};
use crate::grassmann4::Vec3;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ClosedFormName {
    /// The constant fiber `e₁`, i.e. the standard structure.
    Standard,
    RadialPull,
    /// `a(u) = R u` with `R` the rotation about `axis` by `angle`.
    Isometry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "camelCase", deny_unknown_fields)]
pub enum FiberSpec {
    Constant {
        direction: [f64; 3],
    },
    #[serde(rename_all = "camelCase")]
    ClosedForm {
        name: ClosedFormName,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<[f64; 3]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        strength: Option<f64>,
        /// Alternative to `strength` for radial pulls.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lipschitz: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        axis: Option<[f64; 3]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        angle: Option<f64>,
    },
    /// Explicit vertex values, or `source` sampled at `level`.
    SampledGrid {
        level: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        values: Option<Vec<[f64; 3]>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        source: Option<Box<FiberSpec>>,
    },
    /// `retract_to_linear(base, t)`.
    Retracted {
        base: Box<FiberSpec>,
        t: f64,
    },
}

fn v3(a: &[f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

impl FiberSpec {
    pub fn build(&self) -> Result<FiberMap> {
        match self {
            FiberSpec::Constant { direction } => {
                let d = v3(direction);
                if !((d.norm() - 1.0).abs() < 1e-9) {
                    return Err(Error::validation("constant direction must be a unit vector"));
                }
                Ok(FiberMap::Constant { direction: d.normalize() })
            }
            FiberSpec::ClosedForm { name, center, strength, lipschitz, axis, angle } => match name {
                ClosedFormName::Standard => Ok(FiberMap::standard()),
                ClosedFormName::RadialPull => {
                    let c = center.map(|c| v3(&c)).ok_or_else(|| Error::validation("radialPull needs center"))?;
                    match (strength, lipschitz) {
                        (Some(s), None) => FiberMap::radial_pull(c, *s),
                        (None, Some(l)) if *l >= 0.0 => FiberMap::with_lipschitz(c, *l),
                        _ => Err(Error::validation("radialPull needs exactly one of strength, nonnegative lipschitz")),
                    }
                }
                ClosedFormName::Isometry => {
                    let ax = axis.map(|a| v3(&a)).unwrap_or_else(Vec3::z);
                    if ax.norm() < 1e-12 {
                        return Err(Error::validation("isometry axis must be nonzero"));
                    }
                    let r: Matrix3<f64> =
                        Rotation3::from_axis_angle(&Unit::new_normalize(ax), angle.unwrap_or(0.0)).into_inner();
                    Ok(FiberMap::Isometry { rotation: r })
                }
            },
            FiberSpec::SampledGrid { level, values, source } => {
                if *level > 6 {
                    return Err(Error::validation("sampled grid level must be at most 6"));
                }
                match (values, source) {
                    (Some(v), None) => Ok(FiberMap::SampledGrid(SampledFiber::new(*level, v.iter().map(v3).collect())?)),
                    (None, Some(s)) => Ok(FiberMap::SampledGrid(s.build()?.sample_to_grid(*level))),
                    _ => Err(Error::validation("sampledGrid needs exactly one of values, source")),
                }
            }
            FiberSpec::Retracted { base, t } => retract_to_linear(&base.build()?, *t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DocumentKind {
    Fiber,
    Field,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AuditSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct JetSpec {
    pub value: C64,
    pub slope: C64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub higher: Vec<C64>,
}

/// Where and how to solve for a curve of a field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SolveSettings {
    #[serde(default)]
    pub point: [C64; 2],
    /// Complex-linear slope of the base plane; the antilinear part is read
    /// off the field.
    #[serde(default)]
    pub slope: C64,
    pub jet: JetSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct StructureDocument {
    pub schema_version: u32,
    pub kind: DocumentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiber: Option<FiberSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveSettings>,
}

impl StructureDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let doc: StructureDocument =
            serde_json::from_str(text).map_err(|e| Error::validation(format!("structure document: {e}")))?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::validation(format!(
                "unsupported schemaVersion {}; expected {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        match (self.kind, &self.fiber, &self.field) {
            (DocumentKind::Fiber, Some(_), None) => {
                if self.solve.is_some() {
                    return Err(Error::validation("solve settings apply to field documents only"));
                }
                Ok(())
            }
            (DocumentKind::Field, None, Some(_)) => Ok(()),
            (DocumentKind::Fiber, ..) => Err(Error::validation("fiber documents carry exactly a `fiber` payload")),
            (DocumentKind::Field, ..) => Err(Error::validation("field documents carry exactly a `field` payload")),
        }
    }

    pub fn fiber_map(&self) -> Result<FiberMap> {
        self.fiber.as_ref().ok_or_else(|| Error::validation("document is not a fiber"))?.build()
    }

    pub fn field_def(&self) -> Result<FieldDef> {
        self.field.clone().ok_or_else(|| Error::validation("document is not a field"))
    }
}
