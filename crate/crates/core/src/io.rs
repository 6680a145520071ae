//! Structured text (JSON) encoding.
//!
//! Matrices are written as row-major nested arrays; complex entries are
//! `[re, im]` pairs. Floats go through `serde_json`'s shortest round-trip
//! formatting, so parse(serialize(x)) == x bit for bit.
//!
//! ```json
//! { "a": [[-1.5, 0.0], [0.0, -1.5]], "s": [[[1.0, 0.0]]] }
//! ```

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

fn check_rect<T>(rows: &[Vec<T>]) -> std::result::Result<usize, String> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err("matrix rows have different lengths".into());
    }
    Ok(cols)
}

pub mod real_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let cols = super::check_rect(&rows).map_err(serde::de::Error::custom)?;
        Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
    }
}

pub mod complex_rows {
    use nalgebra::DMatrix;
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<Complex64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = m.row_iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<Complex64>, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        let cols = super::check_rect(&rows).map_err(serde::de::Error::custom)?;
        Ok(DMatrix::from_fn(rows.len(), cols, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
    }
}

pub mod opt_complex_rows {
    use nalgebra::DMatrix;
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<DMatrix<Complex64>>, s: S) -> Result<S::Ok, S::Error> {
        match m {
            Some(m) => super::complex_rows::serialize(m, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DMatrix<Complex64>>, D::Error> {
        #[derive(Deserialize)]
        struct Wrap(#[serde(with = "super::complex_rows")] DMatrix<Complex64>);
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

pub fn to_string<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

pub fn from_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

pub fn save<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_string(value)? + "\n").map_err(|e| Error::Serde(format!("{}: {e}", path.display())))
}

pub fn load<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))?;
    from_str(&text)
}

/// Decimal text with 9 significant digits; scientific notation outside `[1e-4, 1e9)`.
pub fn fmt_sig(x: f64) -> String {
    const DIGITS: i32 = 9;
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..9).contains(&mag) {
        return format!("{:.*e}", (DIGITS - 1) as usize, x);
    }
    format!("{:.*}", (DIGITS - 1 - mag).max(0) as usize, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(1.000123456789), "1.00012346");
        assert_eq!(fmt_sig(0.0439183), "0.0439183000");
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(-2.5e-7), "-2.50000000e-7");
    }
}
