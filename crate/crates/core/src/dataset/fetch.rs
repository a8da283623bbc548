//! Account data retrieval contract.
//!
//! Offline files are the canonical input. [`ChainSource`] describes what a
//! remote explorer client has to provide; [`OfflineSource`] serves the same
//! contract from loaded records and [`UnavailableSource`] is the stub used
//! when no remote client is configured.

use std::collections::HashMap;

use thiserror::Error;

use super::{ContractRecord, TransactionRecord};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FetchError {
    #[error("account {0} not found")]
    NotFound(String),
    #[error("remote fetching is not available: {0}")]
    Unavailable(String),
}

/// One page of an account's transaction list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TxPage {
    pub page: usize,
    pub transactions: Vec<TransactionRecord>,
    pub has_more: bool,
}

pub trait ChainSource {
    fn bytecode(&self, account: &str) -> Result<Vec<u8>, FetchError>;

    /// 1-based paging; an empty page with `has_more == false` ends the list.
    fn transactions(&self, account: &str, page: usize) -> Result<TxPage, FetchError>;

    /// Concatenates every page.
    fn all_transactions(&self, account: &str) -> Result<Vec<TransactionRecord>, FetchError> {
        let mut out = Vec::new();
        let mut page = 1;
        loop {
            let p = self.transactions(account, page)?;
            out.extend(p.transactions);
            if !p.has_more {
                return Ok(out);
            }
            page += 1;
        }
    }
}

/// Explorer-style API URL (`module=proxy&action=eth_getCode` for code,
/// `module=account&action=txlist` for transactions).
pub fn etherscan_url(
    base: &str,
    api_key: &str,
    account: &str,
    page: Option<(usize, usize)>,
) -> String {
    let base = base.trim_end_matches('/');
    match page {
        None => format!("{base}/api?module=proxy&action=eth_getCode&address={account}&tag=latest&apikey={api_key}"),
        Some((page, offset)) => format!(
            "{base}/api?module=account&action=txlist&address={account}&startblock=0&endblock=99999999&page={page}&offset={offset}&sort=asc&apikey={api_key}"
        ),
    }
}

pub struct OfflineSource {
    code: HashMap<String, Vec<u8>>,
    by_account: HashMap<String, Vec<TransactionRecord>>,
    page_size: usize,
}

impl OfflineSource {
    pub fn new(contracts: &[ContractRecord], txs: &[TransactionRecord], page_size: usize) -> Self {
        let code = contracts
            .iter()
            .map(|c| (c.account.clone(), c.bytecode.clone()))
            .collect();
        let mut by_account: HashMap<String, Vec<TransactionRecord>> = HashMap::new();
        for tx in txs {
            by_account
                .entry(tx.from.clone())
                .or_default()
                .push(tx.clone());
            if tx.to != tx.from {
                by_account
                    .entry(tx.to.clone())
                    .or_default()
                    .push(tx.clone());
            }
        }
        OfflineSource {
            code,
            by_account,
            page_size: page_size.max(1),
        }
    }
}

impl ChainSource for OfflineSource {
    fn bytecode(&self, account: &str) -> Result<Vec<u8>, FetchError> {
        self.code
            .get(&account.to_ascii_lowercase())
            .cloned()
            .ok_or_else(|| FetchError::NotFound(account.into()))
    }

    fn transactions(&self, account: &str, page: usize) -> Result<TxPage, FetchError> {
        let all = self
            .by_account
            .get(&account.to_ascii_lowercase())
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        let start = page.saturating_sub(1) * self.page_size;
        let end = (start + self.page_size).min(all.len());
        let transactions = if start < all.len() {
            all[start..end].to_vec()
        } else {
            Vec::new()
        };
        Ok(TxPage {
            page,
            transactions,
            has_more: end < all.len(),
        })
    }
}

pub struct UnavailableSource;

impl ChainSource for UnavailableSource {
    fn bytecode(&self, _account: &str) -> Result<Vec<u8>, FetchError> {
        Err(FetchError::Unavailable(
            "no remote client configured; supply contracts.csv".into(),
        ))
    }

    fn transactions(&self, _account: &str, _page: usize) -> Result<TxPage, FetchError> {
        Err(FetchError::Unavailable(
            "no remote client configured; supply transactions.csv".into(),
        ))
    }
}
