//! Line-oriented `key = value` configuration shared by the CLI and experiments.
//!
//! Blank lines and text after `#` are ignored. Every key has a default, and
//! [`Config::dump`] prints the full set in loadable form.

use std::path::Path;

use crate::baseline::BaselineConfig;
use crate::ctf::{CtfModel, CtfParams};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::harness::phantom::PhantomKind;
use crate::harness::simulate::SimulationSpec;
use crate::prior::{Neighborhood, QggmrfParams};
use crate::projector::{ProjectorConfig, Reduction};
use crate::solver::SolverConfig;

/// Conversion between config text and typed values.
pub trait ConfigValue: Sized {
    fn parse_value(s: &str) -> std::result::Result<Self, String>;
    fn format_value(&self) -> String;
}

macro_rules! display_value {
    ($($ty:ty),*) => {$(
        impl ConfigValue for $ty {
            fn parse_value(s: &str) -> std::result::Result<Self, String> {
                s.parse().map_err(|e| format!("cannot parse '{s}': {e}"))
            }
            fn format_value(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

display_value!(usize, u64, f64, bool);

impl ConfigValue for PhantomKind {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        s.parse().map_err(|e: Error| e.to_string())
    }
    fn format_value(&self) -> String {
        self.to_string()
    }
}

impl ConfigValue for Neighborhood {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        match s {
            "6" => Ok(Neighborhood::Six),
            "26" => Ok(Neighborhood::TwentySix),
            other => Err(format!("neighborhood must be 6 or 26, got '{other}'")),
        }
    }
    fn format_value(&self) -> String {
        match self {
            Neighborhood::Six => "6".into(),
            Neighborhood::TwentySix => "26".into(),
        }
    }
}

/// Whether simulated and reconstructed data go through the radial CTF.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CtfChoice {
    Radial,
    Identity,
}

impl ConfigValue for CtfChoice {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        match s {
            "radial" => Ok(Self::Radial),
            "identity" | "none" => Ok(Self::Identity),
            other => Err(format!("ctf must be radial or identity, got '{other}'")),
        }
    }
    fn format_value(&self) -> String {
        match self {
            Self::Radial => "radial".into(),
            Self::Identity => "identity".into(),
        }
    }
}

impl<T: ConfigValue> ConfigValue for Vec<T> {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        s.split(',').map(|p| T::parse_value(p.trim())).collect()
    }
    fn format_value(&self) -> String {
        self.iter().map(ConfigValue::format_value).collect::<Vec<_>>().join(",")
    }
}

macro_rules! config_keys {
    ($( #[doc = $doc:literal] $name:ident : $ty:ty = $default:expr ; )*) => {
        #[derive(Clone, Debug, PartialEq)]
        pub struct Config {
            $( #[doc = $doc] pub $name: $ty, )*
        }

        impl Default for Config {
            fn default() -> Self {
                Self { $( $name: $default, )* }
            }
        }

        impl Config {
            pub const KEYS: &'static [&'static str] = &[$( stringify!($name) ),*];

            /// Sets one key from its text form.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $( stringify!($name) => {
                        self.$name = <$ty as ConfigValue>::parse_value(value)
                            .map_err(|m| Error::Validation(format!("config key '{key}': {m}")))?;
                    } )*
                    other => return Err(Error::Validation(format!("unknown config key '{other}'"))),
                }
                Ok(())
            }

            pub fn get(&self, key: &str) -> Option<String> {
                match key {
                    $( stringify!($name) => Some(self.$name.format_value()), )*
                    _ => None,
                }
            }

            /// All keys with current values, one per line, each preceded by its description.
            pub fn dump(&self) -> String {
                let mut out = String::new();
                $(
                    out.push_str(concat!("#", $doc, "\n"));
                    out.push_str(&format!("{} = {}\n", stringify!($name), self.$name.format_value()));
                )*
                out
            }
        }
    };
}

config_keys! {
    /// Grid side length in voxels; images are size x size.
    size: usize = 32;
    /// Voxel edge length.
    voxel_size: f64 = 1.0;
    /// Phantom family: spheres, shells or blobs.
    phantom: PhantomKind = PhantomKind::Spheres;
    /// Seed for the phantom.
    phantom_seed: u64 = 1;
    /// Number of particle images; 0 means twice the size.
    n_views: usize = 0;
    /// Peak signal-to-noise ratio of the measurements in dB; inf disables noise.
    psnr_db: f64 = 6.02;
    /// Offsets are drawn from [0, offset_fraction * size] pixels.
    offset_fraction: f64 = 0.05;
    /// Seed for geometry, noise and view sub-sampling.
    seed: u64 = 1;
    /// CTF model: radial or identity.
    ctf: CtfChoice = CtfChoice::Radial;
    /// CTF attenuation coefficient.
    ctf_alpha: f64 = 1.0;
    /// Defocus times wavelength.
    ctf_dz_lambda: f64 = 100.0;
    /// Spherical aberration times wavelength cubed.
    ctf_cs_lambda3: f64 = 10.0;
    /// Fraction of views kept.
    subsample: f64 = 1.0;
    /// Ray sampling step in voxels.
    step_size: f64 = 1.0;
    /// Bitwise reproducible back-projection.
    deterministic: bool = true;
    /// Maximum OGM iterations.
    max_iters: usize = 200;
    /// Relative cost change that counts as a plateau.
    rel_cost_tol: f64 = 1e-7;
    /// Power iterations for the Lipschitz estimate.
    lipschitz_power_iters: usize = 20;
    /// Safety factor on the Lipschitz estimate.
    lipschitz_safety: f64 = 1.05;
    /// Record the cost every n iterations.
    record_cost_every: usize = 1;
    /// qGGMRF shape exponent in [1, 2].
    prior_p: f64 = 1.2;
    /// qGGMRF transition constant.
    prior_c: f64 = 0.1;
    /// qGGMRF scale in density units.
    prior_sigma_f: f64 = 0.2;
    /// Prior neighborhood: 6 or 26.
    neighborhood: Neighborhood = Neighborhood::TwentySix;
    /// P+R low-pass width in cycles/pixel.
    gaussian_sigma: f64 = 0.15;
    /// P+R CGLS iterations.
    cgls_iters: usize = 20;
    /// P+R CGLS relative normal-residual tolerance.
    cgls_tol: f64 = 1e-6;
    /// Low-pass widths searched when tuning P+R.
    pr_sigma_grid: Vec<f64> = vec![0.05, 0.1, 0.15, 0.2, 0.25];
    /// CGLS iteration counts searched when tuning P+R.
    pr_iters_grid: Vec<usize> = vec![10, 20, 50, 100];
    /// Prior scales searched when tuning MBIR, as fractions of the maximum true density.
    mbir_sigma_f_grid: Vec<f64> = vec![0.1, 0.2, 0.3, 0.4, 0.6];
    /// PSNR levels of an experiment sweep.
    sweep_psnr_db: Vec<f64> = vec![6.02, 2.40, 0.0];
    /// View fractions of an experiment sweep.
    sweep_subsample: Vec<f64> = vec![1.0, 0.5, 0.25];
}

impl Config {
    /// Parses config text; later lines override earlier ones.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text, origin)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: origin.to_path_buf(),
                message: format!("line {}: expected 'key = value'", n + 1),
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                path: origin.to_path_buf(),
                message: format!("line {}: {e}", n + 1),
            })?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, path)
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.size, self.size, self.size, self.voxel_size)
    }

    pub fn ctf_model(&self) -> Result<CtfModel> {
        Ok(match self.ctf {
            CtfChoice::Identity => CtfModel::Identity,
            CtfChoice::Radial => CtfModel::Radial(CtfParams::new(self.ctf_alpha, self.ctf_dz_lambda, self.ctf_cs_lambda3)?),
        })
    }

    pub fn projector(&self) -> Result<ProjectorConfig> {
        let cfg = ProjectorConfig {
            step_size: self.step_size,
            reduction: if self.deterministic { Reduction::Deterministic } else { Reduction::Unordered },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn simulation(&self) -> Result<SimulationSpec> {
        let grid = self.grid()?;
        let mut spec = SimulationSpec::new(grid);
        if self.n_views > 0 {
            spec.n_views = self.n_views;
        }
        spec.psnr_db = self.psnr_db;
        spec.offset_fraction = self.offset_fraction;
        spec.seed = self.seed;
        spec.ctf = self.ctf_model()?;
        spec.subsample_fraction = self.subsample;
        spec.projector = self.projector()?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn prior(&self) -> Result<QggmrfParams> {
        Ok(QggmrfParams::new(self.prior_p, self.prior_c, self.prior_sigma_f)?.with_neighborhood(self.neighborhood))
    }

    pub fn solver(&self) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            max_iters: self.max_iters,
            rel_cost_tol: self.rel_cost_tol,
            lipschitz_power_iters: self.lipschitz_power_iters,
            lipschitz_safety: self.lipschitz_safety,
            record_cost_every: self.record_cost_every,
            ..SolverConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn baseline(&self) -> Result<BaselineConfig> {
        let cfg = BaselineConfig {
            gaussian_sigma: self.gaussian_sigma,
            cgls_iters: self.cgls_iters,
            cgls_tol: self.cgls_tol,
            projector: self.projector()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trips() {
        let mut cfg = Config::default();
        cfg.set("psnr_db", "inf").unwrap();
        cfg.set("pr_iters_grid", "5, 7").unwrap();
        cfg.set("ctf", "identity").unwrap();
        let text = cfg.dump();
        let back = Config::parse(&text, Path::new("dump")).unwrap();
        assert_eq!(back, cfg);
        assert!(back.psnr_db.is_infinite());
        for key in Config::KEYS {
            assert!(text.contains(&format!("\n{key} = ")) || text.starts_with(&format!("{key} = ")));
        }
    }

    #[test]
    fn comments_and_errors() {
        let cfg = Config::parse("# header\nsize = 16  # small\n\nneighborhood=6\n", Path::new("c")).unwrap();
        assert_eq!(cfg.size, 16);
        assert_eq!(cfg.neighborhood, Neighborhood::Six);
        let err = Config::parse("size = 16\nbogus = 1\n", Path::new("c")).unwrap_err();
        assert!(err.to_string().contains("line 2"));
        assert!(Config::parse("size 16\n", Path::new("c")).is_err());
        assert!(Config::parse("size = -3\n", Path::new("c")).is_err());
    }

    #[test]
    fn conversions_validate() {
        let mut cfg = Config::default();
        assert_eq!(cfg.simulation().unwrap().n_views, 64);
        cfg.n_views = 10;
        assert_eq!(cfg.simulation().unwrap().n_views, 10);
        cfg.prior_p = 3.0;
        assert!(cfg.prior().is_err());
        cfg.subsample = 0.0;
        assert!(cfg.simulation().is_err());
        assert_eq!(cfg.get("size").as_deref(), Some("32"));
        assert_eq!(cfg.get("nope"), None);
    }
}
