//! Grid arguments: comma lists (`0.1,0.2`), evenly spaced ranges
//! (`a:b:n`, both ends included) and powers of two (`2^7`) inside lists.

use anyhow::{bail, Context, Result};

fn scalar(s: &str) -> Result<f64> {
    let s = s.trim();
    if let Some(k) = s.strip_prefix("2^") {
        let k: i32 = k.parse().with_context(|| format!("bad exponent in {s:?}"))?;
        return Ok(2f64.powi(k));
    }
    s.parse::<f64>().with_context(|| format!("{s:?} is not a number"))
}

pub fn real_grid(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    if text.is_empty() {
        bail!("empty grid");
    }
    let parts: Vec<&str> = text.split(':').collect();
    match parts.len() {
        1 => text.split(',').map(scalar).collect(),
        3 => {
            let (a, b) = (scalar(parts[0])?, scalar(parts[1])?);
            let n: usize = parts[2].trim().parse().with_context(|| format!("bad point count in {text:?}"))?;
            match n {
                0 => bail!("range {text:?} has no points"),
                1 => Ok(vec![a]),
                _ => Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()),
            }
        }
        _ => bail!("grid {text:?} is neither a list nor a:b:n"),
    }
}

pub fn int_grid(text: &str) -> Result<Vec<usize>> {
    real_grid(text)?
        .into_iter()
        .map(|v| {
            let r = v.round();
            if r < 1.0 || (v - r).abs() > 1e-9 {
                bail!("{v} is not a positive integer");
            }
            Ok(r as usize)
        })
        .collect()
}

/// A composition such as `0.5,0.5`.
pub fn composition(text: &str) -> Result<Vec<f64>> {
    text.split(',').map(scalar).collect()
}
