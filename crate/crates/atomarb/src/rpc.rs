//! Blocking Ethereum JSON-RPC client.
//!
//! Transport failures (connection errors, timeouts, HTTP 429/5xx, node
//! rate-limit errors) are retried with exponential backoff. Malformed
//! responses and ordinary node errors fail immediately.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;
use std::thread;
use std::time::Duration;

use atomarb_core::types::{encode_hex, Address, RawBlock, RawLog, RawTransaction, TxStatus, H256};
use atomarb_core::TokenAmount;
use num_bigint::BigInt;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::source::{BlockSource, ContractCaller, FetchError};
use crate::wire::{opt_q128, q64, qbig, WireLog};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RpcConfig {
    pub url: String,
    /// `Name: value`, or a bare value sent as `Authorization`.
    pub auth_header: Option<String>,
    pub timeout: Duration,
    pub max_attempts: u32,
    pub backoff_base: Duration,
    pub backoff_cap: Duration,
}

impl RpcConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            auth_header: None,
            timeout: Duration::from_secs(30),
            max_attempts: 5,
            backoff_base: Duration::from_millis(250),
            backoff_cap: Duration::from_secs(15),
        }
    }

    fn backoff(&self, attempt: u32) -> Duration {
        self.backoff_base
            .saturating_mul(1u32.checked_shl(attempt).unwrap_or(u32::MAX))
            .min(self.backoff_cap)
    }

    fn header(&self) -> Option<(String, String)> {
        let raw = self.auth_header.as_deref()?.trim();
        Some(match raw.split_once(':') {
            Some((k, v)) if !k.contains(' ') => (k.trim().to_string(), v.trim().to_string()),
            _ => ("Authorization".to_string(), raw.to_string()),
        })
    }
}

enum Failure {
    Retry(String),
    Fatal(FetchError),
}

/// JSON-RPC error codes that signal load rather than a bad request.
const RETRYABLE_RPC_CODES: [i64; 2] = [-32005, 429];
const METHOD_NOT_FOUND: i64 = -32601;
const MAX_RESPONSE_BYTES: u64 = 512 * 1024 * 1024;

pub struct RpcClient {
    config: RpcConfig,
    agent: ureq::Agent,
    next_id: AtomicU64,
    block_receipts: OnceLock<bool>,
}

#[derive(Deserialize)]
struct Envelope {
    #[serde(default)]
    result: Option<Value>,
    #[serde(default)]
    error: Option<RpcErrorObject>,
}

#[derive(Deserialize)]
struct RpcErrorObject {
    code: i64,
    message: String,
}

impl RpcClient {
    pub fn new(config: RpcConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            config,
            agent,
            next_id: AtomicU64::new(1),
            block_receipts: OnceLock::new(),
        }
    }

    pub fn config(&self) -> &RpcConfig {
        &self.config
    }

    fn attempt(&self, body: &str) -> Result<Value, Failure> {
        let mut req = self.agent.post(&self.config.url).header("Content-Type", "application/json");
        if let Some((k, v)) = self.config.header() {
            req = req.header(k, v);
        }
        let mut resp = req.send(body).map_err(|e| Failure::Retry(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Failure::Retry(format!("HTTP {status}")));
        }
        let text = resp
            .body_mut()
            .with_config()
            .limit(MAX_RESPONSE_BYTES)
            .read_to_string()
            .map_err(|e| Failure::Retry(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(Failure::Fatal(FetchError::Rpc {
                code: status as i64,
                message: format!("HTTP {status}"),
            }));
        }
        let env: Envelope = serde_json::from_str(&text)
            .map_err(|e| Failure::Fatal(FetchError::Decode(format!("invalid JSON-RPC envelope: {e}"))))?;
        if let Some(err) = env.error {
            if RETRYABLE_RPC_CODES.contains(&err.code) {
                return Err(Failure::Retry(format!("node error {}: {}", err.code, err.message)));
            }
            return Err(Failure::Fatal(FetchError::Rpc {
                code: err.code,
                message: err.message,
            }));
        }
        Ok(env.result.unwrap_or(Value::Null))
    }

    /// One JSON-RPC call with retries; returns the `result` member.
    pub fn request(&self, method: &str, params: Value) -> Result<Value, FetchError> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let body = json!({"jsonrpc": "2.0", "id": id, "method": method, "params": params}).to_string();
        let attempts = self.config.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 0..attempts {
            match self.attempt(&body) {
                Ok(v) => return Ok(v),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retry(msg)) => {
                    log::warn!("{method}: attempt {} of {attempts} failed: {msg}", attempt + 1);
                    last = msg;
                    if attempt + 1 < attempts {
                        thread::sleep(self.config.backoff(attempt));
                    }
                }
            }
        }
        Err(FetchError::Transport { attempts, message: last })
    }

    fn typed<T: for<'de> Deserialize<'de>>(&self, method: &str, params: Value) -> Result<T, FetchError> {
        let v = self.request(method, params)?;
        serde_json::from_value(v).map_err(|e| FetchError::Decode(format!("{method}: {e}")))
    }

    pub fn block_number(&self) -> Result<u64, FetchError> {
        let s: String = self.typed("eth_blockNumber", json!([]))?;
        crate::wire::parse_u64_quantity(&s).map_err(|e| FetchError::Decode(e.to_string()))
    }

    /// Whether the endpoint serves `eth_getBlockReceipts`, as decided by the
    /// first probe.
    pub fn supports_block_receipts(&self) -> Option<bool> {
        self.block_receipts.get().copied()
    }

    fn block_receipts(&self, number: u64) -> Result<Option<Vec<RpcReceipt>>, FetchError> {
        if self.block_receipts.get() == Some(&false) {
            return Ok(None);
        }
        match self.typed::<Option<Vec<RpcReceipt>>>("eth_getBlockReceipts", json!([quantity(number)])) {
            Ok(r) => {
                let _ = self.block_receipts.set(true);
                Ok(r)
            }
            // Concurrent fetches may all probe before the first answer is recorded.
            Err(FetchError::Rpc { code, message }) if self.block_receipts.get() != Some(&true) => {
                let unsupported = code == METHOD_NOT_FOUND
                    || message.to_ascii_lowercase().contains("not supported")
                    || message.to_ascii_lowercase().contains("does not exist");
                if unsupported {
                    log::info!("endpoint lacks eth_getBlockReceipts; falling back to per-transaction receipts");
                    let _ = self.block_receipts.set(false);
                    Ok(None)
                } else {
                    Err(FetchError::Rpc { code, message })
                }
            }
            Err(e) => Err(e),
        }
    }

    fn transaction_receipt(&self, hash: &H256) -> Result<RpcReceipt, FetchError> {
        self.typed::<Option<RpcReceipt>>("eth_getTransactionReceipt", json!([hash]))?
            .ok_or_else(|| FetchError::Decode(format!("no receipt for transaction {hash}")))
    }

    /// `eth_call` against `to` at `block` (latest when `None`).
    pub fn call_at(&self, to: Address, calldata: &[u8], block: Option<u64>) -> Result<Vec<u8>, FetchError> {
        let tag = block.map(quantity).unwrap_or_else(|| "latest".to_string());
        let params = json!([{"to": to, "data": encode_hex(calldata)}, tag]);
        match self.typed::<String>("eth_call", params) {
            Ok(hex) => atomarb_core::types::decode_hex(&hex).map_err(|e| FetchError::Decode(format!("eth_call: {e}"))),
            Err(FetchError::Rpc { code, message }) if code == 3 || message.to_ascii_lowercase().contains("revert") => {
                Err(FetchError::Revert(message))
            }
            Err(e) => Err(e),
        }
    }
}

fn quantity(n: u64) -> String {
    format!("{n:#x}")
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RpcBlock {
    #[serde(with = "q64")]
    number: u64,
    #[serde(with = "q64")]
    timestamp: u64,
    miner: Address,
    transactions: Vec<RpcTransaction>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RpcTransaction {
    hash: H256,
    #[serde(with = "q64")]
    transaction_index: u64,
    from: Address,
    to: Option<Address>,
    #[serde(with = "qbig")]
    value: BigInt,
    #[serde(default, with = "opt_q128")]
    gas_price: Option<u128>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RpcReceipt {
    transaction_hash: H256,
    #[serde(with = "q64")]
    gas_used: u64,
    #[serde(default, with = "opt_q128")]
    effective_gas_price: Option<u128>,
    #[serde(default)]
    status: Option<String>,
    logs: Vec<WireLog>,
}

fn merge(block: RpcBlock, receipts: Vec<RpcReceipt>) -> Result<RawBlock, FetchError> {
    let mut by_hash: HashMap<H256, RpcReceipt> = receipts.into_iter().map(|r| (r.transaction_hash, r)).collect();
    let mut transactions = Vec::with_capacity(block.transactions.len());
    for tx in block.transactions {
        let r = by_hash
            .remove(&tx.hash)
            .ok_or_else(|| FetchError::Decode(format!("block {}: no receipt for {}", block.number, tx.hash)))?;
        let status = match r.status.as_deref().map(crate::wire::parse_quantity) {
            Some(Ok(1)) => TxStatus::Success,
            Some(Ok(0)) => TxStatus::Failure,
            other => {
                return Err(FetchError::Decode(format!("receipt {}: bad status {other:?}", tx.hash)));
            }
        };
        let price = r
            .effective_gas_price
            .or(tx.gas_price)
            .ok_or_else(|| FetchError::Decode(format!("receipt {}: no gas price", tx.hash)))?;
        let mut logs: Vec<RawLog> = r.logs.into_iter().map(RawLog::from).collect();
        logs.sort_by_key(|l| l.log_index);
        transactions.push(RawTransaction {
            hash: tx.hash,
            index: tx.transaction_index,
            from: tx.from,
            to: tx.to,
            value: TokenAmount::native(tx.value),
            gas_used: r.gas_used,
            effective_gas_price: price,
            status,
            logs,
        });
    }
    transactions.sort_by_key(|t| t.index);
    let raw = RawBlock {
        number: block.number,
        timestamp: block.timestamp,
        coinbase: block.miner,
        transactions,
    };
    raw.validate()
        .map_err(|e| FetchError::Decode(format!("block {}: {e}", raw.number)))?;
    Ok(raw)
}

impl BlockSource for RpcClient {
    fn head(&self) -> Result<u64, FetchError> {
        self.block_number()
    }

    fn fetch_block(&self, number: u64) -> Result<RawBlock, FetchError> {
        let block: Option<RpcBlock> = self.typed("eth_getBlockByNumber", json!([quantity(number), true]))?;
        let block = block.ok_or(FetchError::NotFound(number))?;
        if block.number != number {
            return Err(FetchError::Decode(format!("asked for block {number}, got {}", block.number)));
        }
        let receipts = if block.transactions.is_empty() {
            Vec::new()
        } else {
            match self.block_receipts(number)? {
                Some(r) => r,
                None => block
                    .transactions
                    .iter()
                    .map(|t| self.transaction_receipt(&t.hash))
                    .collect::<Result<_, _>>()?,
            }
        };
        merge(block, receipts)
    }
}

impl ContractCaller for RpcClient {
    fn call(&self, to: Address, calldata: &[u8]) -> Result<Vec<u8>, FetchError> {
        self.call_at(to, calldata, None)
    }
}
