use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::error::{Error, Result};

/// Graded relevance judgments, keyed by query and document row index.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Qrels {
    judged: BTreeMap<usize, BTreeMap<usize, u32>>,
}

impl Qrels {
    /// Records a judgment; grade 0 means "judged, not relevant" and is
    /// dropped.
    pub fn insert(&mut self, query: usize, doc: usize, grade: u32) {
        if grade > 0 {
            self.judged.entry(query).or_default().insert(doc, grade);
        }
    }

    pub fn relevant(&self, query: usize) -> Option<&BTreeMap<usize, u32>> {
        self.judged.get(&query).filter(|m| !m.is_empty())
    }

    pub fn grade(&self, query: usize, doc: usize) -> u32 {
        self.judged
            .get(&query)
            .and_then(|m| m.get(&doc))
            .copied()
            .unwrap_or(0)
    }

    pub fn queries(&self) -> impl Iterator<Item = usize> + '_ {
        self.judged.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.judged.len()
    }

    pub fn is_empty(&self) -> bool {
        self.judged.is_empty()
    }

    /// Largest referenced document index, if any.
    pub fn max_doc(&self) -> Option<usize> {
        self.judged.values().filter_map(|m| m.keys().next_back().copied()).max()
    }

    /// Parses `query_id<TAB>doc_id<TAB>grade` lines. Ids are resolved
    /// through the given tables, or read as row indices when a table is
    /// absent. Blank lines and `#` comments are skipped.
    pub fn parse_tsv(
        text: &str,
        query_ids: Option<&HashMap<String, usize>>,
        doc_ids: Option<&HashMap<String, usize>>,
    ) -> Result<Self> {
        let resolve = |table: Option<&HashMap<String, usize>>, id: &str, what: &str, line: usize| {
            match table {
                Some(t) => t
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::Input(format!("qrels line {line}: unknown {what} id '{id}'"))),
                None => id
                    .parse::<usize>()
                    .map_err(|_| Error::Input(format!("qrels line {line}: {what} id '{id}' is not a row index"))),
            }
        };
        let mut q = Qrels::default();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = s.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::Input(format!(
                    "qrels line {line}: expected 3 tab-separated fields, got {}",
                    fields.len()
                )));
            }
            let grade: u32 = fields[2]
                .trim()
                .parse()
                .map_err(|_| Error::Input(format!("qrels line {line}: bad grade '{}'", fields[2])))?;
            let qi = resolve(query_ids, fields[0].trim(), "query", line)?;
            let di = resolve(doc_ids, fields[1].trim(), "doc", line)?;
            q.insert(qi, di, grade);
        }
        Ok(q)
    }

    pub fn load(path: &Path, query_ids: Option<&HashMap<String, usize>>, doc_ids: Option<&HashMap<String, usize>>) -> Result<Self> {
        Self::parse_tsv(&std::fs::read_to_string(path)?, query_ids, doc_ids)
    }

    /// TSV with row indices as ids.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (q, docs) in &self.judged {
            for (d, g) in docs {
                out.push_str(&format!("{q}\t{d}\t{g}\n"));
            }
        }
        out
    }
}
