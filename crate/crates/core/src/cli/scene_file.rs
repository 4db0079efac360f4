//! TOML scene files. The schema is documented in `docs/scene-format.md`.

use super::CliError;
use crate::certify::{BoundaryGerm, CertifyOptions, ElementSeeds, GammaScene, OrbitSeed, ProbeSeed, ProfileSweep, SampleRegion};
use crate::contact::{ContactScene, Hypersurface, Orientation};
use crate::dynamics::{FieldSection, OrbitOptions, RecurrenceProbe, Section};
use crate::exterior::{Chart, Coord, KForm, ScalarField};
use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub name: Option<String>,
    pub description: Option<String>,
    pub chart: ChartBlock,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub contact: ContactBlock,
    pub hypersurface: Option<SurfaceBlock>,
    pub perturbation: Option<PerturbationBlock>,
    #[serde(default)]
    pub analysis: AnalysisBlock,
    pub profile: Option<ProfileBlock>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartBlock {
    pub coords: Vec<String>,
    #[serde(default)]
    pub angular: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactBlock {
    pub alpha: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceBlock {
    /// F of a level set {F = value}.
    pub level: Option<String>,
    #[serde(default)]
    pub value: f64,
    /// Graph {graph = height}.
    pub graph: Option<String>,
    pub height: Option<String>,
    #[serde(default)]
    pub orientation: OrientationName,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum OrientationName {
    #[default]
    Positive,
    Negative,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationBlock {
    /// Added to F, or to the height of a graph.
    pub term: String,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisBlock {
    #[serde(default)]
    pub zero_seeds: Vec<Vec<f64>>,
    #[serde(default)]
    pub orbits: Vec<OrbitBlock>,
    #[serde(default)]
    pub probes: Vec<ProbeBlock>,
    pub region: Option<RegionBlock>,
    pub window: Option<String>,
    pub budget: Option<usize>,
    pub horizon: Option<f64>,
    pub capture: Option<f64>,
    pub offset: Option<f64>,
    pub approach: Option<f64>,
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitBlock {
    pub seed: Vec<f64>,
    pub section: String,
    pub t_max: Option<f64>,
    pub locality: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeBlock {
    pub constraints: Vec<String>,
    pub seed: Vec<f64>,
    pub section: String,
    pub iterations: Option<usize>,
    pub tube: Option<f64>,
    pub t_max: Option<f64>,
    pub unit_band: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionBlock {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GermBlock {
    pub value: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileBlock {
    pub h_minus: GermBlock,
    pub h_plus: GermBlock,
    pub samples: Option<usize>,
    pub k_max: Option<f64>,
    pub grid: Option<usize>,
}

/// A parsed and built scene.
pub struct LoadedScene {
    pub file: SceneFile,
    pub source: String,
    pub path: String,
    pub digest: String,
    pub chart: Arc<Chart>,
    pub alpha: KForm,
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map(|i| before.len() - i).unwrap_or(before.len() + 1);
    (line, col)
}

impl LoadedScene {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let source = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Self::parse(&source, &path.display().to_string())
    }

    pub fn parse(source: &str, path: &str) -> Result<Self, CliError> {
        let file: SceneFile = toml::from_str(source).map_err(|e| {
            let msg = e.message().trim().to_string();
            match e.span() {
                Some(sp) => {
                    let (l, c) = line_col(source, sp.start);
                    CliError::Input(format!("{path}:{l}:{c}: {msg}"))
                }
                None => CliError::Input(format!("{path}: {msg}")),
            }
        })?;
        let digest = Sha256::digest(source.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
        let coords = file
            .chart
            .coords
            .iter()
            .map(|n| Coord { name: n.clone(), angular: file.chart.angular.contains(n) })
            .collect();
        for a in &file.chart.angular {
            if !file.chart.coords.contains(a) {
                return Err(CliError::Input(format!("{path}: chart.angular names unknown coordinate `{a}`")));
            }
        }
        let params = file.params.iter().map(|(k, v)| (k.clone(), *v)).collect();
        let chart = Arc::new(Chart::from_parts(coords, params).map_err(|e| CliError::Input(format!("{path}: {e}")))?);
        if file.contact.alpha.len() != chart.dim() {
            return Err(CliError::Input(format!(
                "{path}: contact.alpha has {} entries for {} coordinates",
                file.contact.alpha.len(),
                chart.dim()
            )));
        }
        let coeffs = file
            .contact
            .alpha
            .iter()
            .enumerate()
            .map(|(i, a)| parse_located(&chart, source, path, a, &format!("contact.alpha[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let alpha = KForm::one_form(chart.clone(), coeffs).map_err(|e| CliError::Input(format!("{path}: {e}")))?;
        Ok(LoadedScene { file, source: source.to_string(), path: path.to_string(), digest, chart, alpha })
    }

    /// The contact manifold (chart, α); fails unless α is contact.
    pub fn contact(&self) -> Result<Arc<ContactScene>, CliError> {
        Ok(Arc::new(ContactScene::new(self.alpha.clone()).map_err(|e| CliError::Input(format!("{}: {e}", self.path)))?))
    }

    /// Parses an expression, locating errors in the file where possible.
    pub fn expr(&self, src: &str, key: &str) -> Result<ScalarField, CliError> {
        parse_located(&self.chart, &self.source, &self.path, src, key)
    }

    fn point(&self, p: &[f64], key: &str) -> Result<Vec<f64>, CliError> {
        if p.len() != self.chart.dim() {
            return Err(CliError::Input(format!("{}: {key} has {} entries, expected {}", self.path, p.len(), self.chart.dim())));
        }
        Ok(p.to_vec())
    }

    pub fn name(&self) -> String {
        self.file.name.clone().unwrap_or_else(|| self.path.clone())
    }

    pub fn surface(&self) -> Result<Arc<Hypersurface>, CliError> {
        let sb = self.file.hypersurface.as_ref().ok_or_else(|| CliError::Input(format!("{}: missing [hypersurface]", self.path)))?;
        let pert = match &self.file.perturbation {
            Some(p) => Some(self.expr(&p.term, "perturbation.term")?),
            None => None,
        };
        let s = match (&sb.level, &sb.graph, &sb.height) {
            (Some(f), None, None) => {
                let mut f = self.expr(f, "hypersurface.level")?;
                if let Some(p) = &pert {
                    f = f.add(p);
                }
                Hypersurface::level_set(self.chart.clone(), f, sb.value)
            }
            (None, Some(t), Some(h)) => {
                let ti = self
                    .chart
                    .index(t)
                    .ok_or_else(|| CliError::Input(format!("{}: hypersurface.graph names unknown coordinate `{t}`", self.path)))?;
                let mut h = self.expr(h, "hypersurface.height")?;
                if let Some(p) = &pert {
                    h = h.add(p);
                }
                Hypersurface::graph(self.chart.clone(), ti, h)
            }
            _ => {
                return Err(CliError::Input(format!(
                    "{}: [hypersurface] needs either `level` or both `graph` and `height`",
                    self.path
                )))
            }
        }
        .map_err(|e| CliError::Input(format!("{}: {e}", self.path)))?;
        let s = if sb.orientation == OrientationName::Negative { s.with_orientation(Orientation::NEGATIVE) } else { s };
        Ok(Arc::new(s))
    }

    pub fn seeds(&self) -> Result<ElementSeeds, CliError> {
        let a = &self.file.analysis;
        let mut seeds = ElementSeeds::default();
        for (i, z) in a.zero_seeds.iter().enumerate() {
            seeds.zeros.push(self.point(z, &format!("analysis.zero_seeds[{i}]"))?);
        }
        for (i, o) in a.orbits.iter().enumerate() {
            let key = format!("analysis.orbits[{i}]");
            let sec: Arc<dyn Section> = Arc::new(FieldSection::new(self.expr(&o.section, &format!("{key}.section"))?));
            let mut options = OrbitOptions::default();
            if let Some(t) = o.t_max {
                options.t_max = t;
            }
            options.locality = o.locality;
            seeds.orbits.push(OrbitSeed { seed: self.point(&o.seed, &format!("{key}.seed"))?, section: sec, options });
        }
        for (i, p) in a.probes.iter().enumerate() {
            let key = format!("analysis.probes[{i}]");
            let constraints = p
                .constraints
                .iter()
                .enumerate()
                .map(|(j, c)| self.expr(c, &format!("{key}.constraints[{j}]")))
                .collect::<Result<Vec<_>, _>>()?;
            let section: Arc<dyn Section> = Arc::new(FieldSection::new(self.expr(&p.section, &format!("{key}.section"))?));
            let probe = RecurrenceProbe {
                constraints,
                seed: self.point(&p.seed, &format!("{key}.seed"))?,
                iterations: p.iterations.unwrap_or(50),
                tube: p.tube.unwrap_or(1e-2),
                t_max: p.t_max.unwrap_or(50.0),
                unit_band: p.unit_band.unwrap_or(1e-3),
            };
            seeds.probes.push(ProbeSeed { probe, section });
        }
        Ok(seeds)
    }

    pub fn region(&self) -> Result<Option<SampleRegion>, CliError> {
        match &self.file.analysis.region {
            None => Ok(None),
            Some(r) => {
                let lower = self.point(&r.lower, "analysis.region.lower")?;
                let upper = self.point(&r.upper, "analysis.region.upper")?;
                if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
                    return Err(CliError::Input(format!("{}: analysis.region needs lower <= upper", self.path)));
                }
                Ok(Some(SampleRegion { lower, upper }))
            }
        }
    }

    pub fn certify_options(&self, seed: u64) -> Result<CertifyOptions, CliError> {
        let a = &self.file.analysis;
        let d = CertifyOptions::default();
        Ok(CertifyOptions {
            budget: a.budget.unwrap_or(d.budget),
            seed,
            horizon: a.horizon.unwrap_or(d.horizon),
            capture: a.capture.unwrap_or(d.capture),
            offset: a.offset.unwrap_or(d.offset),
            approach: a.approach.unwrap_or(d.approach),
            region: self.region()?,
            window: match &a.window {
                Some(w) => Some(self.expr(w, "analysis.window")?),
                None => None,
            },
        })
    }

    /// Γ = (chart, α) of this file with the sampling box of `analysis.region`.
    pub fn profile_inputs(&self) -> Result<(BoundaryGerm, BoundaryGerm, GammaScene, ProfileSweep, usize), CliError> {
        let p = self.file.profile.as_ref().ok_or_else(|| CliError::Input(format!("{}: missing [profile]", self.path)))?;
        let r = self.region()?.ok_or_else(|| CliError::Input(format!("{}: convexify needs analysis.region", self.path)))?;
        let refs: Vec<&str> = self.file.contact.alpha.iter().map(|s| s.as_str()).collect();
        let gamma = GammaScene::new(&self.name(), self.chart.clone(), &refs, r.lower, r.upper)
            .map_err(|e| CliError::Input(format!("{}: {e}", self.path)))?;
        let mut sweep = ProfileSweep::default();
        if let Some(k) = p.k_max {
            sweep.k_max = k;
        }
        if let Some(g) = p.grid {
            sweep.grid = g;
        }
        Ok((
            BoundaryGerm { value: p.h_minus.value, slope: p.h_minus.slope },
            BoundaryGerm { value: p.h_plus.value, slope: p.h_plus.slope },
            gamma,
            sweep,
            p.samples.unwrap_or(500),
        ))
    }
}

fn parse_located(chart: &Chart, source: &str, path: &str, src: &str, key: &str) -> Result<ScalarField, CliError> {
    chart.parse(src).map_err(|e| {
        let at = match (&e, source.find(&format!("\"{src}\""))) {
            (crate::Error::Parse { column, .. }, Some(off)) => {
                let (l, c) = line_col(source, off + 1);
                format!("{path}:{l}:{}", c + column - 1)
            }
            _ => path.to_string(),
        };
        CliError::Input(format!("{at}: {key}: {e}"))
    })
}
