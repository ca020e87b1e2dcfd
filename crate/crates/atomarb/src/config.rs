//! Configuration files and the merged run configuration.
//!
//! Precedence, lowest first: built-in defaults, the `--config` file,
//! `ATOMARB_*` environment variables, command-line flags. Environment and flag
//! handling is done by clap; this module merges the result over the file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use atomarb_core::amount::{parse_rational, render_rational, MAX_DECIMALS};
use atomarb_core::classify::{BidEventSpec, ClassifierConfig, SearcherIdentity, UnpricedTokenPolicy};
use atomarb_core::golden::WMATIC;
use atomarb_core::price::PriceTable;
use atomarb_core::types::Address;
use num_bigint::BigInt;
use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Direction;

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> Result<T, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError(format!("{what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| ConfigError(format!("{what} {}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenEntry {
    pub token: Address,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<String>,
    /// Price of one whole token in the common currency: a decimal or `n/d`.
    pub price: String,
    pub decimals: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommonCurrency {
    pub token: Address,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<String>,
    pub decimals: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BidEventEntry {
    pub signature: String,
    pub amount_word: usize,
}

/// Classifier section of a config file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierFile {
    pub common_currency: CommonCurrency,
    /// ERC-20 wrapper of the native coin; defaults to the common currency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub native_token: Option<Address>,
    #[serde(default)]
    pub prices: Vec<TokenEntry>,
    #[serde(default)]
    pub fastlane_addresses: Vec<Address>,
    #[serde(default)]
    pub unpriced_token_policy: UnpricedTokenPolicy,
    #[serde(default)]
    pub searcher_identity: SearcherIdentity,
    /// Raw-unit allowance per token below zero for the sufficiency test.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub dust_threshold: BTreeMap<Address, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bid_event: Option<BidEventEntry>,
}

impl Default for ClassifierFile {
    /// WMATIC as both common currency and native wrapper, nothing else priced.
    fn default() -> Self {
        Self {
            common_currency: CommonCurrency {
                token: WMATIC,
                symbol: Some("WMATIC".into()),
                decimals: 18,
            },
            native_token: None,
            prices: Vec::new(),
            fastlane_addresses: Vec::new(),
            unpriced_token_policy: UnpricedTokenPolicy::default(),
            searcher_identity: SearcherIdentity::default(),
            dust_threshold: BTreeMap::new(),
            bid_event: None,
        }
    }
}

impl ClassifierFile {
    pub fn to_config(&self) -> Result<ClassifierConfig, ConfigError> {
        let cc = &self.common_currency;
        check_decimals(cc.token, cc.decimals)?;
        let native = self.native_token.unwrap_or(cc.token);
        let mut table = PriceTable::new(cc.token, cc.decimals, native);
        for e in &self.prices {
            check_decimals(e.token, e.decimals)?;
            let price = parse_rational(&e.price).map_err(|err| ConfigError(format!("price of {}: {err}", e.token)))?;
            table
                .set(e.token, price, e.decimals)
                .map_err(|err| ConfigError(err.to_string()))?;
        }
        if table.native_price().is_none() {
            return Err(ConfigError(format!(
                "native token {native} has no price; fees and bids could not be valued"
            )));
        }
        let mut cfg = ClassifierConfig::new(table).with_fastlane(self.fastlane_addresses.iter().copied());
        cfg.unpriced_token_policy = self.unpriced_token_policy;
        cfg.searcher_identity = self.searcher_identity;
        for (token, raw) in &self.dust_threshold {
            let v: BigInt = raw
                .parse()
                .map_err(|_| ConfigError(format!("dust threshold of {token}: not an integer: {raw}")))?;
            if v.is_negative() {
                return Err(ConfigError(format!("dust threshold of {token} is negative")));
            }
            cfg.dust_threshold.insert(*token, v);
        }
        if let Some(b) = &self.bid_event {
            cfg.bid_event = BidEventSpec {
                signature: b.signature.clone(),
                amount_word: b.amount_word,
            };
        }
        Ok(cfg)
    }

    /// Inverse of [`ClassifierFile::to_config`]; `symbols` labels entries.
    pub fn from_config(cfg: &ClassifierConfig, symbols: &BTreeMap<Address, String>) -> Self {
        let table = &cfg.price_table;
        let common = table.common_currency();
        let common_decimals = table.get(&common).map(|p| p.decimals).unwrap_or(18);
        let prices = table
            .iter()
            .filter(|(t, _)| **t != common)
            .map(|(t, p)| TokenEntry {
                token: *t,
                symbol: symbols.get(t).cloned(),
                price: render_rational(&p.price),
                decimals: p.decimals,
            })
            .collect();
        let bid_event = (cfg.bid_event != BidEventSpec::default()).then(|| BidEventEntry {
            signature: cfg.bid_event.signature.clone(),
            amount_word: cfg.bid_event.amount_word,
        });
        Self {
            common_currency: CommonCurrency {
                token: common,
                symbol: symbols.get(&common).cloned(),
                decimals: common_decimals,
            },
            native_token: (table.native_token() != common).then_some(table.native_token()),
            prices,
            fastlane_addresses: cfg.fastlane_addresses.iter().copied().collect(),
            unpriced_token_policy: cfg.unpriced_token_policy,
            searcher_identity: cfg.searcher_identity,
            dust_threshold: cfg.dust_threshold.iter().map(|(t, v)| (*t, v.to_string())).collect(),
            bid_event,
        }
    }
}

fn check_decimals(token: Address, decimals: u8) -> Result<(), ConfigError> {
    if decimals > MAX_DECIMALS {
        return Err(ConfigError(format!("{token}: {decimals} decimals exceeds {MAX_DECIMALS}")));
    }
    Ok(())
}

/// A `--fastlane-addresses` file: a JSON array of addresses.
pub fn load_fastlane_addresses(path: &Path) -> Result<Vec<Address>, ConfigError> {
    read_json(path, "FastLane address file")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

/// Everything a config file may set. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub rpc_url: Option<String>,
    pub auth_header: Option<String>,
    pub timeout_secs: Option<u64>,
    pub max_attempts: Option<u32>,
    pub from_block: Option<u64>,
    pub to_block: Option<u64>,
    pub direction: Option<Direction>,
    pub confirmations: Option<u64>,
    pub parallelism: Option<usize>,
    pub checkpoint: Option<PathBuf>,
    pub pool_cache: Option<PathBuf>,
    pub fixture: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Option<ReportFormat>,
    pub epoch_start: Option<String>,
    pub bucket_days: Option<u64>,
    pub exclusions: Option<PathBuf>,
    pub usd_rates: Option<PathBuf>,
    pub fastlane_addresses: Option<PathBuf>,
    pub searcher_identity: Option<SearcherIdentity>,
    pub classifier: Option<ClassifierFile>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        read_json(path, "config file")
    }

    /// Fills every unset field of `self` from `base`.
    pub fn or(self, base: ConfigFile) -> ConfigFile {
        ConfigFile {
            rpc_url: self.rpc_url.or(base.rpc_url),
            auth_header: self.auth_header.or(base.auth_header),
            timeout_secs: self.timeout_secs.or(base.timeout_secs),
            max_attempts: self.max_attempts.or(base.max_attempts),
            from_block: self.from_block.or(base.from_block),
            to_block: self.to_block.or(base.to_block),
            direction: self.direction.or(base.direction),
            confirmations: self.confirmations.or(base.confirmations),
            parallelism: self.parallelism.or(base.parallelism),
            checkpoint: self.checkpoint.or(base.checkpoint),
            pool_cache: self.pool_cache.or(base.pool_cache),
            fixture: self.fixture.or(base.fixture),
            out: self.out.or(base.out),
            format: self.format.or(base.format),
            epoch_start: self.epoch_start.or(base.epoch_start),
            bucket_days: self.bucket_days.or(base.bucket_days),
            exclusions: self.exclusions.or(base.exclusions),
            usd_rates: self.usd_rates.or(base.usd_rates),
            fastlane_addresses: self.fastlane_addresses.or(base.fastlane_addresses),
            searcher_identity: self.searcher_identity.or(base.searcher_identity),
            classifier: self.classifier.or(base.classifier),
        }
    }
}

pub const DEFAULT_CONFIRMATIONS: u64 = 256;
pub const DEFAULT_BUCKET_DAYS: u64 = 28;
pub const DEFAULT_TIMEOUT_SECS: u64 = 30;
pub const DEFAULT_MAX_ATTEMPTS: u32 = 5;

/// Fully merged settings. Paths and values that a command does not need may
/// stay unset; each command checks its own requirements.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub settings: ConfigFile,
    pub classifier_file: ClassifierFile,
    pub classifier: ClassifierConfig,
}

impl RunConfig {
    /// Merges `overrides` (flags and environment) over the optional config
    /// file and resolves the classifier.
    pub fn resolve(config_path: Option<&Path>, overrides: ConfigFile) -> Result<Self, ConfigError> {
        let file = match config_path {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let settings = overrides.or(file);
        let mut classifier_file = settings.classifier.clone().unwrap_or_default();
        if let Some(path) = &settings.fastlane_addresses {
            classifier_file.fastlane_addresses = load_fastlane_addresses(path)?;
        }
        if let Some(s) = settings.searcher_identity {
            classifier_file.searcher_identity = s;
        }
        let classifier = classifier_file.to_config()?;
        if settings.bucket_days == Some(0) {
            return Err(ConfigError("bucket length must be at least one day".into()));
        }
        if settings.parallelism == Some(0) {
            return Err(ConfigError("parallelism must be at least 1".into()));
        }
        if settings.max_attempts == Some(0) {
            return Err(ConfigError("max_attempts must be at least 1".into()));
        }
        Ok(Self {
            settings,
            classifier_file,
            classifier,
        })
    }

    /// The merged configuration as JSON with credentials masked.
    pub fn redacted_json(&self) -> String {
        let mut shown = self.settings.clone();
        shown.rpc_url = shown.rpc_url.as_deref().map(redact_url);
        shown.auth_header = shown.auth_header.as_deref().map(redact_header);
        shown.classifier = Some(self.classifier_file.clone());
        let mut text = serde_json::to_string_pretty(&shown).expect("config serializes");
        text.push('\n');
        text
    }
}

const MASK: &str = "***";

/// Keeps scheme, host and port. Credentials, path, query and fragment can
/// all carry API keys, so each is masked when present.
pub fn redact_url(raw: &str) -> String {
    let Ok(mut url) = url::Url::parse(raw) else {
        return MASK.to_string();
    };
    if !url.username().is_empty() || url.password().is_some() {
        let _ = url.set_username(MASK);
        let _ = url.set_password(None);
    }
    if !matches!(url.path(), "" | "/") {
        url.set_path(MASK);
    }
    if url.query().is_some() {
        url.set_query(Some(MASK));
    }
    if url.fragment().is_some() {
        url.set_fragment(Some(MASK));
    }
    url.to_string()
}

fn redact_header(raw: &str) -> String {
    match raw.split_once(':') {
        Some((name, _)) if !name.contains(' ') => format!("{}: {MASK}", name.trim()),
        _ => MASK.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn url_secrets_are_masked() {
        assert_eq!(redact_url("https://polygon.example.org"), "https://polygon.example.org/");
        assert_eq!(
            redact_url("https://user:pw@node.example.org:8545/v2/abcdef?key=s3cret#frag"),
            "https://***@node.example.org:8545/***?***#***"
        );
        assert_eq!(redact_url("not a url"), "***");
        assert_eq!(redact_header("X-Api-Key: abc"), "X-Api-Key: ***");
        assert_eq!(redact_header("Bearer abc"), "***");
    }

    #[test]
    fn flags_beat_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"rpc_url":"http://file","parallelism":3,"bucket_days":7}"#).unwrap();
        let over = ConfigFile {
            rpc_url: Some("http://flag".into()),
            ..Default::default()
        };
        let rc = RunConfig::resolve(Some(&path), over).unwrap();
        assert_eq!(rc.settings.rpc_url.as_deref(), Some("http://flag"));
        assert_eq!(rc.settings.parallelism, Some(3));
        assert_eq!(rc.settings.bucket_days, Some(7));
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"rpc":"http://file"}"#).unwrap();
        assert!(RunConfig::resolve(Some(&path), ConfigFile::default()).is_err());
        let over = ConfigFile {
            parallelism: Some(0),
            ..Default::default()
        };
        assert!(RunConfig::resolve(None, over).is_err());
    }

    #[test]
    fn native_coin_must_be_priced() {
        let mut f = ClassifierFile {
            native_token: Some(Address([9; 20])),
            ..ClassifierFile::default()
        };
        assert!(f.to_config().unwrap_err().0.contains("no price"));
        f.prices.push(TokenEntry {
            token: Address([9; 20]),
            symbol: None,
            price: "2/3".into(),
            decimals: 18,
        });
        assert!(f.to_config().is_ok());
    }

    #[test]
    fn classifier_file_round_trip() {
        let mut f = ClassifierFile::default();
        f.prices.push(TokenEntry {
            token: Address([2; 20]),
            symbol: Some("BUSD".into()),
            price: "1.25".into(),
            decimals: 18,
        });
        f.fastlane_addresses.push(Address([0xfa; 20]));
        f.dust_threshold.insert(Address([2; 20]), "10".into());
        f.unpriced_token_policy = UnpricedTokenPolicy::Reject;
        let cfg = f.to_config().unwrap();
        let symbols = [(WMATIC, "WMATIC".to_string()), (Address([2; 20]), "BUSD".to_string())].into();
        assert_eq!(ClassifierFile::from_config(&cfg, &symbols), f);
    }
}
