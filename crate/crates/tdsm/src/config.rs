//! Flat key-value experiment configuration.
//!
//! The format is intentionally minimal for diffability: one `key = value`
//! assignment per line, `#` comments, dotted section names
//! (`scene.receivers.count = 48`). Every key is typed and validated; unknown
//! keys, duplicates and malformed values are rejected with the key named in
//! the error.

use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

use crate::forward::{BornParams, Mode2d, SolverParams};
use crate::scene::{
    PhysicalConstants, ReceiverArray, ReceiverLayout, SamplingGrid, Scatterer, Scene, SceneError,
    SourceSpec,
};
use crate::waveform::{PulseSpec, WaveformError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("key `{key}`: {reason}")]
    BadValue { key: String, reason: String },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Waveform(#[from] WaveformError),
    #[error("{path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Which data generator a simulation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    Tm,
    Te,
    Born3d,
}

impl ForwardMode {
    pub fn mode_2d(&self) -> Option<Mode2d> {
        match self {
            ForwardMode::Tm => Some(Mode2d::Tm),
            ForwardMode::Te => Some(Mode2d::Te),
            ForwardMode::Born3d => None,
        }
    }

    pub fn components(&self) -> usize {
        match self {
            ForwardMode::Tm => 1,
            ForwardMode::Te => 2,
            ForwardMode::Born3d => 3,
        }
    }
}

/// Born-synthesis settings (3D scenes only).
#[derive(Debug, Clone, Copy)]
pub struct BornSettings {
    pub sigma: f64,
    /// Defaults to four times the pulse carrier when absent.
    pub xi_max: Option<f64>,
    pub n_freq: usize,
    pub n_steps: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct ImagingSettings {
    /// Imaging horizon; defaults to the full trace duration.
    pub t_final: Option<f64>,
    pub rel_threshold: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct NoiseSettings {
    pub delta: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Default)]
pub struct OutputSettings {
    pub traces: Option<String>,
    pub grid: Option<String>,
    pub pgm: Option<String>,
}

/// Fully validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scene: Scene,
    pub mode: ForwardMode,
    pub t_final: f64,
    pub solver: Option<SolverParams>,
    pub born: BornSettings,
    pub imaging: ImagingSettings,
    pub noise: NoiseSettings,
    pub output: OutputSettings,
}

impl ExperimentConfig {
    pub fn solver_params(&self) -> Result<&SolverParams, ConfigError> {
        self.solver
            .as_ref()
            .ok_or_else(|| ConfigError::MissingKey("solver.h".into()))
    }

    pub fn born_params(&self) -> BornParams {
        BornParams {
            sigma: self.born.sigma,
            xi_max: self
                .born
                .xi_max
                .unwrap_or(4.0 * self.scene.source.pulse.carrier_omega()),
            n_freq: self.born.n_freq,
            t_final: self.t_final,
            n_steps: self.born.n_steps,
        }
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut map = KeyMap::parse(text)?;

    let dim = map.require_usize("scene.dim")?;
    if dim != 2 && dim != 3 {
        return Err(ConfigError::BadValue {
            key: "scene.dim".into(),
            reason: format!("dimension must be 2 or 3, got {dim}"),
        });
    }

    let constants = PhysicalConstants {
        eps0: map
            .take_f64("scene.constants.eps0")?
            .unwrap_or(PhysicalConstants::VACUUM_EPS0),
        mu0: map
            .take_f64("scene.constants.mu0")?
            .unwrap_or(PhysicalConstants::VACUUM_MU0),
        sigma: map.take_f64("scene.constants.sigma")?.unwrap_or(0.0),
    };

    let pulse = parse_pulse(&mut map)?;
    let source = SourceSpec {
        location: map.require_point("scene.source.location", dim)?,
        polarization: map
            .take_point("scene.source.polarization", dim)?
            .unwrap_or([0.0; 3]),
        pulse,
    };

    let receivers = parse_receivers(&mut map)?;

    let grid_min = map.require_point("scene.grid.min", dim)?;
    let grid_max = map.require_point("scene.grid.max", dim)?;
    let grid_n = map.require_usize("scene.grid.n")?;
    let grid = SamplingGrid::new(
        dim,
        [
            [grid_min[0], grid_max[0]],
            [grid_min[1], grid_max[1]],
            [grid_min[2], grid_max[2]],
        ],
        grid_n,
    )?;

    let scatterers = parse_scatterers(&mut map, dim)?;

    let mode = match map.require_str("simulate.mode")?.as_str() {
        "tm" => ForwardMode::Tm,
        "te" => ForwardMode::Te,
        "born3d" => ForwardMode::Born3d,
        other => {
            return Err(ConfigError::BadValue {
                key: "simulate.mode".into(),
                reason: format!("expected tm, te or born3d, got `{other}`"),
            })
        }
    };
    if (mode == ForwardMode::Born3d) != (dim == 3) {
        return Err(ConfigError::BadValue {
            key: "simulate.mode".into(),
            reason: format!("mode {mode:?} does not match scene.dim = {dim}"),
        });
    }
    let t_final = map.require_f64("simulate.t_final")?;

    let solver = parse_solver(&mut map, mode)?;

    let born = BornSettings {
        sigma: map.take_f64("born.sigma")?.unwrap_or(0.0),
        xi_max: map.take_f64("born.xi_max")?,
        n_freq: map.take_usize("born.n_freq")?.unwrap_or(2048),
        n_steps: map.take_usize("born.n_steps")?.unwrap_or(500),
    };

    let imaging = ImagingSettings {
        t_final: map.take_f64("imaging.t_final")?,
        rel_threshold: map.take_f64("imaging.rel_threshold")?.unwrap_or(0.3),
    };
    if !(imaging.rel_threshold > 0.0 && imaging.rel_threshold <= 1.0) {
        return Err(ConfigError::BadValue {
            key: "imaging.rel_threshold".into(),
            reason: format!("must lie in (0, 1], got {}", imaging.rel_threshold),
        });
    }

    let noise = NoiseSettings {
        delta: map.take_f64("noise.delta")?.unwrap_or(0.0),
        seed: map.take_u64("noise.seed")?.unwrap_or(0),
    };
    if noise.delta < 0.0 {
        return Err(ConfigError::BadValue {
            key: "noise.delta".into(),
            reason: format!("noise level must be nonnegative, got {}", noise.delta),
        });
    }

    let output = OutputSettings {
        traces: map.take_str("output.traces")?,
        grid: map.take_str("output.grid")?,
        pgm: map.take_str("output.pgm")?,
    };

    map.finish()?;

    let scene = Scene::build(constants, scatterers, source, receivers, grid)?;
    Ok(ExperimentConfig {
        scene,
        mode,
        t_final,
        solver,
        born,
        imaging,
        noise,
        output,
    })
}

fn parse_pulse(map: &mut KeyMap) -> Result<PulseSpec, ConfigError> {
    let kind = map.require_str("scene.source.pulse.kind")?;
    let f0 = map.require_f64("scene.source.pulse.f0")?;
    let t0 = map.take_f64("scene.source.pulse.t0")?;
    let smoothing = map.take_f64("scene.source.pulse.smoothing")?;
    match kind.as_str() {
        "gaussian_sine" => {
            if smoothing.is_some() {
                return Err(ConfigError::BadValue {
                    key: "scene.source.pulse.smoothing".into(),
                    reason: "only meaningful for the smooth_sawtooth pulse".into(),
                });
            }
            Ok(match t0 {
                Some(t0) => PulseSpec::gaussian_sine_delayed(f0, t0)?,
                None => PulseSpec::gaussian_sine(f0)?,
            })
        }
        "smooth_sawtooth" => {
            if t0.is_some() {
                return Err(ConfigError::BadValue {
                    key: "scene.source.pulse.t0".into(),
                    reason: "only meaningful for the gaussian_sine pulse".into(),
                });
            }
            let smoothing = smoothing.ok_or_else(|| {
                ConfigError::MissingKey("scene.source.pulse.smoothing".into())
            })?;
            Ok(PulseSpec::smooth_sawtooth(f0, smoothing)?)
        }
        other => Err(ConfigError::BadValue {
            key: "scene.source.pulse.kind".into(),
            reason: format!("expected gaussian_sine or smooth_sawtooth, got `{other}`"),
        }),
    }
}

fn parse_receivers(map: &mut KeyMap) -> Result<ReceiverArray, ConfigError> {
    let layout = map.require_str("scene.receivers.layout")?;
    match layout.as_str() {
        "circle" => {
            let center = map
                .take_point("scene.receivers.center", 2)?
                .unwrap_or([0.0; 3]);
            let radius = map.require_f64("scene.receivers.radius")?;
            let count = map.require_usize("scene.receivers.count")?;
            Ok(ReceiverArray::new(ReceiverLayout::Circle {
                center,
                radius,
                count,
            })?)
        }
        "cube" => {
            let half_width = map.require_f64("scene.receivers.half_width")?;
            let per_face = map.require_usize("scene.receivers.count")?;
            Ok(ReceiverArray::new(ReceiverLayout::Cube {
                half_width,
                per_face,
            })?)
        }
        other => Err(ConfigError::BadValue {
            key: "scene.receivers.layout".into(),
            reason: format!("expected circle or cube, got `{other}`"),
        }),
    }
}

fn parse_scatterers(map: &mut KeyMap, dim: usize) -> Result<Vec<Scatterer>, ConfigError> {
    let mut scatterers = Vec::new();
    for index in 0.. {
        let prefix = format!("scene.scatterer.{index}");
        let center_key = format!("{prefix}.center");
        if !map.contains(&center_key) {
            break;
        }
        let center = map.require_point(&center_key, dim)?;
        let hw_key = format!("{prefix}.half_widths");
        let hw = map.require_floats(&hw_key)?;
        let half_widths = match hw.len() {
            1 => [hw[0]; 3],
            n if n == dim => {
                let mut out = [hw[0]; 3];
                out[..dim].copy_from_slice(&hw);
                out
            }
            3 => [hw[0], hw[1], hw[2]],
            n => {
                return Err(ConfigError::BadValue {
                    key: hw_key,
                    reason: format!("expected 1 or {dim} half-widths, got {n}"),
                })
            }
        };
        let eps_r = map.require_f64(&format!("{prefix}.eps_r"))?;
        scatterers.push(Scatterer {
            center,
            half_widths,
            eps_r,
        });
    }
    Ok(scatterers)
}

fn parse_solver(map: &mut KeyMap, mode: ForwardMode) -> Result<Option<SolverParams>, ConfigError> {
    let h = map.take_f64("solver.h")?;
    let tau = map.take_f64("solver.tau")?;
    let padding = map.take_f64("solver.padding")?;
    let absorber_cells = map.take_usize("solver.absorber_cells")?;
    let absorber_exponent = map.take_f64("solver.absorber_exponent")?;
    let source_radius = map.take_f64("solver.source_radius_cells")?;
    let (h, tau) = match (h, tau, mode) {
        (Some(h), Some(tau), _) => (h, tau),
        (None, None, ForwardMode::Born3d) => return Ok(None),
        (None, _, ForwardMode::Tm | ForwardMode::Te) => {
            return Err(ConfigError::MissingKey("solver.h".into()))
        }
        (_, None, ForwardMode::Tm | ForwardMode::Te) => {
            return Err(ConfigError::MissingKey("solver.tau".into()))
        }
        (None, Some(_), ForwardMode::Born3d) => {
            return Err(ConfigError::MissingKey("solver.h".into()))
        }
        (Some(_), None, ForwardMode::Born3d) => {
            return Err(ConfigError::MissingKey("solver.tau".into()))
        }
    };
    let mut params = SolverParams::new(h, tau);
    if let Some(p) = padding {
        params.padding = p;
    }
    if let Some(a) = absorber_cells {
        params.absorber_cells = a;
    }
    if let Some(e) = absorber_exponent {
        params.absorber_exponent = e;
    }
    if let Some(r) = source_radius {
        params.source_radius_cells = r;
    }
    Ok(Some(params))
}

/// Parsed `key = value` assignments with typed, consuming accessors.
struct KeyMap {
    entries: BTreeMap<String, String>,
}

impl KeyMap {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: raw.trim().to_string(),
                });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if entries.insert(key.clone(), value).is_some() {
                return Err(ConfigError::DuplicateKey(key));
            }
        }
        Ok(Self { entries })
    }

    fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn take_str(&mut self, key: &str) -> Result<Option<String>, ConfigError> {
        Ok(self.entries.remove(key))
    }

    fn require_str(&mut self, key: &str) -> Result<String, ConfigError> {
        self.take_str(key)?
            .ok_or_else(|| ConfigError::MissingKey(key.into()))
    }

    fn take_f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.entries
            .remove(key)
            .map(|v| {
                v.parse::<f64>().map_err(|_| ConfigError::BadValue {
                    key: key.into(),
                    reason: format!("`{v}` is not a number"),
                })
            })
            .transpose()
    }

    fn require_f64(&mut self, key: &str) -> Result<f64, ConfigError> {
        self.take_f64(key)?
            .ok_or_else(|| ConfigError::MissingKey(key.into()))
    }

    fn take_usize(&mut self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.entries
            .remove(key)
            .map(|v| {
                v.parse::<usize>().map_err(|_| ConfigError::BadValue {
                    key: key.into(),
                    reason: format!("`{v}` is not a nonnegative integer"),
                })
            })
            .transpose()
    }

    fn require_usize(&mut self, key: &str) -> Result<usize, ConfigError> {
        self.take_usize(key)?
            .ok_or_else(|| ConfigError::MissingKey(key.into()))
    }

    fn take_u64(&mut self, key: &str) -> Result<Option<u64>, ConfigError> {
        self.entries
            .remove(key)
            .map(|v| {
                v.parse::<u64>().map_err(|_| ConfigError::BadValue {
                    key: key.into(),
                    reason: format!("`{v}` is not a nonnegative integer"),
                })
            })
            .transpose()
    }

    fn require_floats(&mut self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let raw = self.require_str(key)?;
        raw.split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| ConfigError::BadValue {
                    key: key.into(),
                    reason: format!("`{tok}` is not a number"),
                })
            })
            .collect()
    }

    /// Point with `dim` or 3 coordinates; 2D points may spell out a zero z.
    fn take_point(&mut self, key: &str, dim: usize) -> Result<Option<[f64; 3]>, ConfigError> {
        if !self.contains(key) {
            return Ok(None);
        }
        let values = self.require_floats(key)?;
        let point = match (values.len(), dim) {
            (2, 2) => [values[0], values[1], 0.0],
            (3, _) => [values[0], values[1], values[2]],
            (n, _) => {
                return Err(ConfigError::BadValue {
                    key: key.into(),
                    reason: format!("expected {dim} coordinates, got {n}"),
                })
            }
        };
        Ok(Some(point))
    }

    fn require_point(&mut self, key: &str, dim: usize) -> Result<[f64; 3], ConfigError> {
        self.take_point(key, dim)?
            .ok_or_else(|| ConfigError::MissingKey(key.into()))
    }

    /// All keys must have been consumed; report the first leftover.
    fn finish(self) -> Result<(), ConfigError> {
        match self.entries.into_keys().next() {
            Some(key) => Err(ConfigError::UnknownKey(key)),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::PulseKind;

    pub(crate) const PAPER_TM_CONFIG: &str = r#"
# Three boxes probed from a circle of receivers.
scene.dim = 2
scene.constants.sigma = 0.0
scene.source.location = -8 0
scene.source.polarization = 0 1
scene.source.pulse.kind = gaussian_sine
scene.source.pulse.f0 = 2.99792458e8
scene.receivers.layout = circle
scene.receivers.radius = 6.0
scene.receivers.count = 48
scene.grid.min = -2.5 -2.5
scene.grid.max = 2.5 2.5
scene.grid.n = 60
scene.scatterer.0.center = 0 1.5
scene.scatterer.0.half_widths = 0.1
scene.scatterer.0.eps_r = 2.0
scene.scatterer.1.center = 0 -1.5
scene.scatterer.1.half_widths = 0.1
scene.scatterer.1.eps_r = 2.0
scene.scatterer.2.center = 1.5 0
scene.scatterer.2.half_widths = 0.1
scene.scatterer.2.eps_r = 2.0
simulate.mode = tm
simulate.t_final = 2e-7
solver.h = 0.1
solver.tau = 2e-10
imaging.rel_threshold = 0.3
noise.delta = 0.0
noise.seed = 7
"#;

    #[test]
    fn parses_paper_tm_config() {
        let cfg = parse_config(PAPER_TM_CONFIG).unwrap();
        assert_eq!(cfg.mode, ForwardMode::Tm);
        assert_eq!(cfg.scene.receivers.len(), 48);
        assert_eq!(cfg.scene.scatterers.len(), 3);
        assert_eq!(cfg.scene.grid.n_per_axis, 60);
        assert_eq!(cfg.solver.unwrap().cell_size, 0.1);
        assert_eq!(cfg.imaging.rel_threshold, 0.3);
        assert_eq!(cfg.noise.seed, 7);
    }

    #[test]
    fn rejects_unknown_key() {
        let text = format!("{PAPER_TM_CONFIG}\nscene.receivers.shape = oval\n");
        match parse_config(&text) {
            Err(ConfigError::UnknownKey(key)) => assert_eq!(key, "scene.receivers.shape"),
            other => panic!("expected unknown-key error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicate_and_syntax_errors() {
        assert!(matches!(
            parse_config("scene.dim = 2\nscene.dim = 3\n"),
            Err(ConfigError::DuplicateKey(_))
        ));
        assert!(matches!(
            parse_config("scene.dim : 2\n"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn rejects_malformed_value_with_key_name() {
        let text = PAPER_TM_CONFIG.replace("solver.h = 0.1", "solver.h = ten-centimeters");
        match parse_config(&text) {
            Err(ConfigError::BadValue { key, .. }) => assert_eq!(key, "solver.h"),
            other => panic!("expected bad-value error, got {other:?}"),
        }
    }

    #[test]
    fn missing_required_key_is_named() {
        let text = PAPER_TM_CONFIG.replace("simulate.t_final = 2e-7", "");
        match parse_config(&text) {
            Err(ConfigError::MissingKey(key)) => assert_eq!(key, "simulate.t_final"),
            other => panic!("expected missing-key error, got {other:?}"),
        }
    }

    #[test]
    fn sawtooth_pulse_round_trip_and_cross_field_checks() {
        let text = PAPER_TM_CONFIG
            .replace(
                "scene.source.pulse.kind = gaussian_sine",
                "scene.source.pulse.kind = smooth_sawtooth\nscene.source.pulse.smoothing = 1e18",
            );
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.scene.source.pulse.kind, PulseKind::SmoothSawtooth);

        let bad = format!("{text}scene.source.pulse.t0 = 1e-9\n");
        assert!(matches!(
            parse_config(&bad),
            Err(ConfigError::BadValue { .. })
        ));
    }

    #[test]
    fn born_config_needs_no_solver() {
        let text = r#"
scene.dim = 3
scene.source.location = 0 -8 0
scene.source.polarization = 1 0 0
scene.source.pulse.kind = gaussian_sine
scene.source.pulse.f0 = 2.99792458e8
scene.receivers.layout = cube
scene.receivers.half_width = 6.0
scene.receivers.count = 49
scene.grid.min = -2 -2 -2
scene.grid.max = 2 2 2
scene.grid.n = 30
scene.scatterer.0.center = 0 0 0
scene.scatterer.0.half_widths = 0.5
scene.scatterer.0.eps_r = 2.0
simulate.mode = born3d
simulate.t_final = 1e-7
born.n_steps = 500
"#;
        let cfg = parse_config(text).unwrap();
        assert!(cfg.solver.is_none());
        assert_eq!(cfg.scene.receivers.len(), 294);
        let born = cfg.born_params();
        assert_eq!(born.n_freq, 2048);
        assert!(born.xi_max > 0.0);
    }
}
