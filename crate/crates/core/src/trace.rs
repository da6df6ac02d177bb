// SPDX-License-Identifier: Apache-2.0

//! Line-delimited JSON trace files.
//!
//! One header record, one record per generated step, one footer record. Field
//! order is fixed by the struct definitions, so two runs with identical flags
//! serialize byte-identically.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{Adversary, ForkMode, Variant};
use crate::model::{Action, InitVector, ProcessId, StateDigest};
use crate::oracle::SearchBudget;
use crate::protocols::Protocol;

pub const FORMAT: &str = "flp-trace";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("malformed trace at line {line}: {reason}")]
    Malformed { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub digest: String,
    pub tool_version: String,
    pub protocol: String,
    pub n: usize,
    pub t: usize,
    pub variant: Variant,
    pub budget: SearchBudget,
    pub init_vector: String,
    pub initial_digest: StateDigest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub turn_process: ProcessId,
    pub extension_actions: Vec<Action>,
    pub applied_action: Action,
    pub state_digest: StateDigest,
    pub decided: Vec<ProcessId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Footer {
    pub steps: usize,
    pub rounds_completed: usize,
    pub fork_modes: Vec<ForkMode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum Record {
    Header(Header),
    Step(StepRecord),
    Footer(Footer),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceFile {
    pub header: Header,
    pub steps: Vec<StepRecord>,
    pub footer: Footer,
}

impl TraceFile {
    /// Captures every step generated so far by `adv`.
    pub fn from_adversary<P: Protocol>(adv: &Adversary<P>) -> TraceFile {
        let p = adv.protocol();
        let init = adv.bivalent_init();
        let header = Header {
            format: FORMAT.to_string(),
            version: VERSION,
            digest: StateDigest::ALGORITHM.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            protocol: p.name().to_string(),
            n: p.n(),
            t: 1,
            variant: adv.variant(),
            budget: adv.budget(),
            init_vector: init.init.to_string(),
            initial_digest: init.state.digest(),
        };
        let steps = adv
            .steps()
            .iter()
            .map(|s| StepRecord {
                index: s.index,
                turn_process: s.process,
                extension_actions: s.extension.actions().to_vec(),
                applied_action: s.action,
                state_digest: s.digest,
                decided: s
                    .state
                    .locals()
                    .iter()
                    .enumerate()
                    .filter(|(_, l)| p.decided(l).is_some())
                    .map(|(k, _)| ProcessId::new(k + 1))
                    .collect(),
            })
            .collect();
        let footer = Footer {
            steps: adv.steps().len(),
            rounds_completed: adv.snapshot().round,
            fork_modes: adv.steps().iter().map(|s| s.fork_mode).collect(),
        };
        TraceFile {
            header,
            steps,
            footer,
        }
    }

    pub fn init_vector(&self) -> Result<InitVector, TraceError> {
        self.header
            .init_vector
            .parse()
            .map_err(|e| TraceError::Malformed {
                line: 1,
                reason: format!("{e}"),
            })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), TraceError> {
        let mut line = |r: &Record| -> Result<(), TraceError> {
            serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
            Ok(())
        };
        line(&Record::Header(self.header.clone()))?;
        for s in &self.steps {
            line(&Record::Step(s.clone()))?;
        }
        line(&Record::Footer(self.footer.clone()))?;
        w.flush()?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<TraceFile, TraceError> {
        let mut header = None;
        let mut steps = Vec::new();
        let mut footer = None;
        for (k, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = k + 1;
            let malformed = |reason: String| TraceError::Malformed {
                line: lineno,
                reason,
            };
            if line.trim().is_empty() {
                continue;
            }
            if footer.is_some() {
                return Err(malformed("record after footer".into()));
            }
            let record: Record =
                serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
            match (record, header.is_some()) {
                (Record::Header(h), false) => {
                    if h.format != FORMAT || h.version != VERSION {
                        return Err(malformed(format!(
                            "unsupported format {} v{}",
                            h.format, h.version
                        )));
                    }
                    if h.digest != StateDigest::ALGORITHM {
                        return Err(malformed(format!("unsupported digest {}", h.digest)));
                    }
                    header = Some(h);
                }
                (Record::Header(_), true) => return Err(malformed("second header".into())),
                (_, false) => return Err(malformed("first record must be the header".into())),
                (Record::Step(s), true) => steps.push(s),
                (Record::Footer(f), true) => footer = Some(f),
            }
        }
        let header = header.ok_or(TraceError::Malformed {
            line: 1,
            reason: "empty trace".into(),
        })?;
        let footer = footer.ok_or(TraceError::Malformed {
            line: steps.len() + 1,
            reason: "missing footer".into(),
        })?;
        Ok(TraceFile {
            header,
            steps,
            footer,
        })
    }

    pub fn parse(text: &str) -> Result<TraceFile, TraceError> {
        TraceFile::read_from(text.as_bytes())
    }
}
