//! Plain-text formats: kernel files and CSV tables.
//!
//! A kernel file lists one jump per line as `z1 z2 rate`, where `rate` is a
//! decimal or a fraction such as `3/4`. Blank lines and text after `#` are
//! ignored.

use crate::error::KernelError;
use crate::model::{validate_kernel, JumpKernel, Rate, Vec2};

pub fn parse_kernel(text: &str) -> Result<JumpKernel, KernelError> {
    let mut rates = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: &str| KernelError::Parse {
            line: i + 1,
            message: message.to_string(),
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [z1, z2, r] = fields[..] else {
            return Err(parse_err("expected `z1 z2 rate`"));
        };
        let z1: i32 = z1.parse().map_err(|_| parse_err("z1 is not an integer"))?;
        let z2: i32 = z2.parse().map_err(|_| parse_err("z2 is not an integer"))?;
        let rate = Rate::parse(r).ok_or_else(|| parse_err("rate is not a number"))?;
        rates.push((Vec2::new(z1, z2), rate));
    }
    validate_kernel(rates)
}

/// Inverse of [`parse_kernel`], with exact rates written as fractions.
pub fn format_kernel(kernel: &JumpKernel) -> String {
    kernel
        .rates()
        .iter()
        .map(|(z, r)| format!("{} {} {}\n", z.x, z.y, r))
        .collect()
}

/// CSV with a header row; every value in shortest round-trip form.
pub fn csv_table(header: &[&str], columns: &[&[f64]]) -> String {
    assert_eq!(header.len(), columns.len(), "one header per column");
    let rows = columns.iter().map(|c| c.len()).max().unwrap_or(0);
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..rows {
        let row: Vec<String> = columns
            .iter()
            .map(|c| c.get(i).map_or(String::new(), |v| format!("{v:e}")))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Prefixes a CSV body with a `# manifest=<name>` comment line.
pub fn tag_manifest(csv: &str, manifest: &str) -> String {
    format!("# manifest={manifest}\n{csv}")
}
