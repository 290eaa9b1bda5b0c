use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

macro_rules! categories {
    ($($variant:ident),+ $(,)?) => {
        /// The log types the recognizer can choose from.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum LogCategory {
            $($variant),+
        }

        impl LogCategory {
            pub const ALL: [LogCategory; 16] = [$(LogCategory::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $(LogCategory::$variant => stringify!($variant)),+
                }
            }
        }
    };
}

categories!(
    Android, Apache, BGL, HDFS, HPC, Hadoop, HealthApp, Linux, Mac, OpenSSH, OpenStack, Proxifier,
    Spark, Thunderbird, Windows, Zookeeper,
);

impl LogCategory {
    pub fn names() -> Vec<&'static str> {
        Self::ALL.iter().map(|c| c.name()).collect()
    }
}

impl fmt::Display for LogCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LogCategory {
    type Err = Error;

    /// Case-insensitive registry lookup.
    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim();
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name().eq_ignore_ascii_case(wanted))
            .ok_or_else(|| Error::UnknownCategory {
                reply: s.to_string(),
            })
    }
}

/// Drain parameters for one log category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrainConfig {
    pub category: LogCategory,
    /// Header layout such as `<Date> <Time> <Level> <Content>`. Text between
    /// fields is a regex fragment; runs of spaces match any whitespace.
    pub log_format: String,
    /// Patterns replaced by `<*>` in the content before tokenizing.
    #[serde(default)]
    pub mask_regexes: Vec<String>,
    /// Similarity threshold.
    pub st: f64,
    /// Tree depth counting the root, the length layer and the leaf layer.
    pub depth: usize,
    pub max_children: usize,
}

impl DrainConfig {
    pub const DEFAULT_ST: f64 = 0.4;
    pub const DEFAULT_DEPTH: usize = 4;
    pub const DEFAULT_MAX_CHILDREN: usize = 100;

    /// Fallback settings: whole line as content, no masks.
    pub fn default_for(category: LogCategory) -> Self {
        Self {
            category,
            log_format: "<Content>".to_string(),
            mask_regexes: Vec::new(),
            st: Self::DEFAULT_ST,
            depth: Self::DEFAULT_DEPTH,
            max_children: Self::DEFAULT_MAX_CHILDREN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.st) {
            return Err(Error::InvalidConfig(format!("st {} outside [0, 1]", self.st)));
        }
        if self.depth < 3 {
            return Err(Error::InvalidConfig(format!("depth {} below 3", self.depth)));
        }
        if self.max_children == 0 {
            return Err(Error::InvalidConfig("max_children must be positive".into()));
        }
        let content_fields = self.log_format.matches("<Content>").count();
        if content_fields != 1 {
            return Err(Error::InvalidConfig(format!(
                "log_format must contain exactly one <Content> field, found {content_fields}"
            )));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }
}

const BUILTIN: [&str; 16] = [
    include_str!("../../drain/Android.toml"),
    include_str!("../../drain/Apache.toml"),
    include_str!("../../drain/BGL.toml"),
    include_str!("../../drain/HDFS.toml"),
    include_str!("../../drain/HPC.toml"),
    include_str!("../../drain/Hadoop.toml"),
    include_str!("../../drain/HealthApp.toml"),
    include_str!("../../drain/Linux.toml"),
    include_str!("../../drain/Mac.toml"),
    include_str!("../../drain/OpenSSH.toml"),
    include_str!("../../drain/OpenStack.toml"),
    include_str!("../../drain/Proxifier.toml"),
    include_str!("../../drain/Spark.toml"),
    include_str!("../../drain/Thunderbird.toml"),
    include_str!("../../drain/Windows.toml"),
    include_str!("../../drain/Zookeeper.toml"),
];

/// Per-category Drain settings. The built-in set carries the Loghub benchmark
/// parameters; a directory of `<Category>.toml` files can override them.
#[derive(Debug, Clone, PartialEq)]
pub struct DrainRegistry {
    configs: BTreeMap<LogCategory, DrainConfig>,
}

impl Default for DrainRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl DrainRegistry {
    pub fn builtin() -> Self {
        let configs = BUILTIN
            .iter()
            .map(|text| {
                let c = DrainConfig::from_toml(text).expect("built-in drain config is valid");
                (c.category, c)
            })
            .collect();
        Self { configs }
    }

    pub fn empty() -> Self {
        Self {
            configs: BTreeMap::new(),
        }
    }

    /// Built-in settings overlaid with every `*.toml` file in `dir`.
    pub fn with_overrides(dir: &Path) -> Result<Self> {
        let mut registry = Self::builtin();
        let mut paths: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        paths.sort();
        for path in paths {
            let text = std::fs::read_to_string(&path)?;
            let config = DrainConfig::from_toml(&text)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
            registry.insert(config);
        }
        Ok(registry)
    }

    pub fn insert(&mut self, config: DrainConfig) {
        self.configs.insert(config.category, config);
    }

    pub fn get(&self, category: LogCategory) -> DrainConfig {
        self.configs
            .get(&category)
            .cloned()
            .unwrap_or_else(|| DrainConfig::default_for(category))
    }
}
