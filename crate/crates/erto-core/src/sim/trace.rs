//! Tab-separated event trace for replay and regression comparison.
//!
//! One line per data-path event:
//!
//! ```text
//! time  node  kind  packet  power  detail
//! ```
//!
//! `time` is printed with nine decimals and `power` with six so that two
//! byte-identical traces imply identical execution. `power` is `-` except on
//! transmissions. `detail` carries the candidate-set size on `tx`, the
//! attempt number on `retx`, the received rank on `rx`, and `-` elsewhere.
//! Hello frames are not traced.

use std::fmt::Write as _;

use crate::geometry::NodeId;

#[derive(Debug, Clone, Default)]
pub(crate) struct TraceSink {
    buf: String,
}

impl TraceSink {
    pub(crate) fn new() -> Self {
        TraceSink { buf: String::new() }
    }

    pub(crate) fn line(
        &mut self,
        time: f64,
        node: NodeId,
        kind: &str,
        packet: u64,
        power: Option<f64>,
        detail: Option<u64>,
    ) {
        let _ = write!(self.buf, "{time:.9}\t{node}\t{kind}\t{packet}\t");
        match power {
            Some(p) => {
                let _ = write!(self.buf, "{p:.6}");
            }
            None => self.buf.push('-'),
        }
        self.buf.push('\t');
        match detail {
            Some(d) => {
                let _ = write!(self.buf, "{d}");
            }
            None => self.buf.push('-'),
        }
        self.buf.push('\n');
    }

    pub(crate) fn as_str(&self) -> &str {
        &self.buf
    }

    pub(crate) fn into_string(self) -> String {
        self.buf
    }
}
