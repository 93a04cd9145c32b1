//! Experiment configuration (TOML) and run-directory naming.
//!
//! ```toml
//! seed = 2024
//!
//! [channel]
//! n = 64
//! la = 5
//! kfactor_db = 20.0
//!
//! [link]
//! m = 512
//! rho = 0.15
//!
//! [datasets.recnet]
//! n_train = 30000
//! n_val = 3000
//! n_test = 9000
//! beta = 0.7
//! gen_snr_db = 20.0
//!
//! [sweep]
//! snr_grid_db = [5.0, 10.0, 15.0, 20.0]
//! schemes = ["proposed", "ablation", "ref8"]
//! ```
//!
//! Every table and key is optional; omitted values take the defaults below.
//! `gen_snr_db = inf` requests noise-free generation.

use crate::bench::SweepConfig;
use crate::channel::ChannelConfig;
use crate::error::{config_err, Error, Result};
use crate::nn::{AdamConfig, Dims, TrainConfig};
use crate::phy::Detector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    /// Spreading length (symbols per frame).
    pub m: usize,
    pub rho: f64,
    pub e_u: f64,
    pub pilot_len: usize,
    pub detector: Detector,
    /// Use the true link vector instead of the LS estimate inside the receiver.
    pub perfect_g: bool,
    pub phi_seed: u64,
    pub ref8_iters: usize,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            m: 512,
            rho: 0.15,
            e_u: 1.0,
            pilot_len: 64,
            detector: Detector::Lmmse,
            perfect_g: false,
            phi_seed: 11,
            ref8_iters: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Sennet,
    Aidnet,
    Recnet,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Sennet, Role::Aidnet, Role::Recnet];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Sennet => "sennet",
            Role::Aidnet => "aidnet",
            Role::Recnet => "recnet",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    #[serde(skip, default = "default_role")]
    pub role: Role,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// Fraction of LoS draws (ignored by the LoS-only aidnet set except for validation).
    pub beta: f64,
    pub gen_snr_db: f64,
}

fn default_role() -> Role {
    Role::Sennet
}

impl DatasetSpec {
    pub fn defaults(role: Role) -> Self {
        let (n_train, n_val, n_test, gen_snr_db) = match role {
            Role::Sennet => (100_000, 10_000, 30_000, f64::INFINITY),
            Role::Aidnet => (60_000, 6_000, 18_000, 10.0),
            Role::Recnet => (30_000, 3_000, 9_000, 20.0),
        };
        Self { role, n_train, n_val, n_test, beta: 0.7, gen_snr_db }
    }

    pub fn count(&self, split: Split) -> usize {
        match split {
            Split::Train => self.n_train,
            Split::Val => self.n_val,
            Split::Test => self.n_test,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.role.as_str();
        if self.n_train == 0 || self.n_val == 0 || self.n_test == 0 {
            return Err(config_err(format!("datasets.{r}: counts must be positive")));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(config_err(format!("datasets.{r}.beta must lie in [0, 1]")));
        }
        if self.gen_snr_db.is_nan() {
            return Err(config_err(format!("datasets.{r}.gen_snr_db is NaN")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetsConfig {
    pub sennet: DatasetSpec,
    pub aidnet: DatasetSpec,
    pub recnet: DatasetSpec,
}

impl Default for DatasetsConfig {
    fn default() -> Self {
        Self {
            sennet: DatasetSpec::defaults(Role::Sennet),
            aidnet: DatasetSpec::defaults(Role::Aidnet),
            recnet: DatasetSpec::defaults(Role::Recnet),
        }
    }
}

impl DatasetsConfig {
    pub fn get(&self, role: Role) -> &DatasetSpec {
        match role {
            Role::Sennet => &self.sennet,
            Role::Aidnet => &self.aidnet,
            Role::Recnet => &self.recnet,
        }
    }

    fn fix_roles(&mut self) {
        self.sennet.role = Role::Sennet;
        self.aidnet.role = Role::Aidnet;
        self.recnet.role = Role::Recnet;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub epochs_sennet: usize,
    pub epochs_aidnet: usize,
    pub epochs_recnet: usize,
    /// Random sensor initializations screened by their validation loss after
    /// one epoch; the best one is trained for the full schedule.
    pub sennet_init_candidates: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self { batch_size: 128, adam: AdamConfig::default(), epochs_sennet: 20, epochs_aidnet: 50, epochs_recnet: 50, sennet_init_candidates: 32 }
    }
}

impl TrainSettings {
    pub fn for_role(&self, role: Role) -> TrainConfig {
        let epochs = match role {
            Role::Sennet => self.epochs_sennet,
            Role::Aidnet => self.epochs_aidnet,
            Role::Recnet => self.epochs_recnet,
        };
        TrainConfig { epochs, batch_size: self.batch_size, adam: self.adam }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed for datasets, initialization and shuffling.
    pub seed: u64,
    pub channel: ChannelConfig,
    pub link: LinkConfig,
    pub datasets: DatasetsConfig,
    pub train: TrainSettings,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            channel: ChannelConfig::default(),
            link: LinkConfig::default(),
            datasets: DatasetsConfig::default(),
            train: TrainSettings::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let mut cfg: Self = toml::from_str(s).map_err(|e| config_err(e.to_string()))?;
        cfg.datasets.fix_roles();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::Missing(path.to_path_buf()));
        }
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        let l = &self.link;
        if !l.m.is_power_of_two() || l.m < self.channel.n {
            return Err(config_err(format!("link.m = {} must be a power of two >= N", l.m)));
        }
        crate::phy::tx::check_power_split(l.rho, l.e_u)?;
        if l.pilot_len == 0 {
            return Err(config_err("link.pilot_len must be >= 1"));
        }
        if l.ref8_iters == 0 {
            return Err(config_err("link.ref8_iters must be >= 1"));
        }
        for role in Role::ALL {
            self.datasets.get(role).validate()?;
        }
        if self.train.batch_size == 0 {
            return Err(config_err("train.batch_size must be >= 1"));
        }
        if self.train.sennet_init_candidates == 0 {
            return Err(config_err("train.sennet_init_candidates must be >= 1"));
        }
        self.sweep.validate()
    }

    pub fn dims(&self) -> Dims {
        Dims { n: self.channel.n, la: self.channel.la, m: self.link.m }
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    /// `<root>/<hash>-s<seed>`.
    pub fn run_dir(&self, root: &Path) -> PathBuf {
        root.join(format!("{}-s{}", self.hash(), self.seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.datasets.aidnet.role, Role::Aidnet);
        assert!(back.datasets.sennet.gen_snr_db.is_infinite());
    }

    #[test]
    fn partial_config_uses_defaults() {
        let cfg = ExperimentConfig::from_toml_str("seed = 5\n[link]\nrho = 0.2\n").unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.link.rho, 0.2);
        assert_eq!(cfg.link.m, 512);
        assert_eq!(cfg.datasets.sennet.n_train, 100_000);
        assert_eq!(
            (cfg.train.epochs_sennet, cfg.train.epochs_aidnet, cfg.train.epochs_recnet),
            (20, 50, 50)
        );
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.link.rho = 0.2;
        assert_ne!(a.hash(), b.hash());
        assert!(a.run_dir(Path::new("/x")).ends_with(format!("{}-s2024", a.hash())));
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig::from_toml_str("[link]\nrho = 1.5\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[link]\nm = 500\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[channel]\nla = 9\n").is_err());
        assert!(ExperimentConfig::from_toml_str("bogus = 1\n").is_err());
        assert!(ExperimentConfig::from_toml_str(
            "[datasets.aidnet]\nn_train = 0\nn_val = 1\nn_test = 1\nbeta = 1.0\ngen_snr_db = 10.0\n"
        )
        .is_err());
    }
}
