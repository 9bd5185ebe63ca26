//! Moment file format:
//!
//! ```text
//! moments <num_vars> <t>
//! : 1
//! 0: 1/2
//! 0 3: 0.25
//! ```
//!
//! One line per defined entry: sorted ordinals, a colon, then the value as a
//! decimal or `p/q`. Blank lines and `#` comments are ignored.

use super::{IndexSet, MomentVector};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Entries in [`IndexSet`] order, so output is canonical.
pub fn format_moments<T: Scalar>(y: &MomentVector<T>) -> String {
    let mut out = format!("moments {} {}\n", y.num_vars(), y.level());
    for (set, v) in y.iter() {
        let ords: Vec<String> = set.iter().map(|i| i.to_string()).collect();
        out.push_str(&ords.join(" "));
        out.push_str(": ");
        out.push_str(&v.format_value());
        out.push('\n');
    }
    out
}

/// Parses a file and checks every `|I| <= min(2t+2, n)` is defined.
pub fn parse_moments<T: Scalar>(text: &str) -> Result<MomentVector<T>> {
    let y = parse_moments_partial(text)?;
    y.check_complete()?;
    Ok(y)
}

/// Parses a file without the completeness check.
pub fn parse_moments_partial<T: Scalar>(text: &str) -> Result<MomentVector<T>> {
    let mut y: Option<MomentVector<T>> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some(y) = y.as_mut() else {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 || parts[0] != "moments" {
                return Err(Error::syntax(line_no, "expected header `moments <n> <t>`"));
            }
            let n = parts[1]
                .parse()
                .map_err(|_| Error::syntax(line_no, "bad variable count"))?;
            let t = parts[2]
                .parse()
                .map_err(|_| Error::syntax(line_no, "bad level"))?;
            y = Some(MomentVector::new(n, t));
            continue;
        };
        let (lhs, rhs) = line
            .split_once(':')
            .ok_or_else(|| Error::syntax(line_no, "expected `<ordinals>: <value>`"))?;
        let mut ords = Vec::new();
        for tok in lhs.split_whitespace() {
            let i: usize = tok
                .parse()
                .map_err(|_| Error::syntax(line_no, format!("bad ordinal {tok:?}")))?;
            if i >= y.num_vars() {
                return Err(Error::syntax(line_no, format!("ordinal {i} out of range")));
            }
            if ords.last().is_some_and(|&last| last >= i) {
                return Err(Error::syntax(
                    line_no,
                    "ordinals must be strictly increasing",
                ));
            }
            ords.push(i);
        }
        let value =
            T::parse_value(rhs.trim()).map_err(|e| Error::syntax(line_no, e.to_string()))?;
        let set = IndexSet::new(ords);
        if y.contains(&set) {
            return Err(Error::syntax(line_no, format!("duplicate entry {set}")));
        }
        y.insert(set, value)?;
    }
    y.ok_or_else(|| Error::syntax(1, "missing header"))
}
