//! Price CSV ingestion into log-increment matrices.
//!
//! The expected layout is a header row naming a timestamp column followed by
//! asset columns, then one strictly time-ordered row of positive prices per
//! record. Timestamps compare numerically when every label parses as a
//! number, lexicographically otherwise (ISO-8601 dates order correctly).

use std::io::Read;

use nalgebra::DMatrix;

use crate::data::DataMatrix;
use crate::error::{data, Error, Result};

/// Ordered price records for a set of assets.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    timestamps: Vec<String>,
    assets: Vec<String>,
    prices: DMatrix<f64>,
}

impl PriceSeries {
    pub fn timestamps(&self) -> &[String] {
        &self.timestamps
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    /// Prices, one row per record (rows × assets).
    pub fn prices(&self) -> &DMatrix<f64> {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}

/// Parse a price CSV: header `timestamp,asset1,…,assetN`, rows of positive
/// prices. Rejects missing cells, non-positive or non-numeric prices, and
/// out-of-order timestamps, reporting the offending 1-based file row/column.
pub fn ingest_prices<R: Read>(reader: R) -> Result<PriceSeries> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = csv.headers()?.clone();
    if headers.len() < 2 {
        return Err(data(
            "price CSV needs a timestamp column and at least one asset column",
        ));
    }
    let assets: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
    let n = assets.len();

    let mut timestamps = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let record = record?;
        let file_row = i + 2; // 1-based, counting the header
        if record.len() != n + 1 {
            return Err(Error::Ingest {
                row: file_row,
                col: record.len().min(n + 1),
                reason: format!("expected {} fields, found {}", n + 1, record.len()),
            });
        }
        let ts = record.get(0).unwrap_or("").trim();
        if ts.is_empty() {
            return Err(Error::Ingest {
                row: file_row,
                col: 1,
                reason: "missing timestamp".into(),
            });
        }
        timestamps.push(ts.to_owned());
        for (c, field) in record.iter().skip(1).enumerate() {
            let field = field.trim();
            if field.is_empty() {
                return Err(Error::Ingest {
                    row: file_row,
                    col: c + 2,
                    reason: "missing cell".into(),
                });
            }
            let price: f64 = field.parse().map_err(|_| Error::Ingest {
                row: file_row,
                col: c + 2,
                reason: format!("unparsable price {field:?}"),
            })?;
            if !price.is_finite() || price <= 0.0 {
                return Err(Error::Ingest {
                    row: file_row,
                    col: c + 2,
                    reason: format!("non-positive price {price}"),
                });
            }
            values.push(price);
        }
    }
    if timestamps.is_empty() {
        return Err(data("price CSV contains no records"));
    }

    // strict time ordering: numeric when every label is numeric
    let numeric: Option<Vec<f64>> = timestamps.iter().map(|s| s.parse().ok()).collect();
    let ordered = match &numeric {
        Some(nums) => nums.windows(2).position(|w| w[1] <= w[0]),
        None => timestamps.windows(2).position(|w| w[1] <= w[0]),
    };
    if let Some(pos) = ordered {
        return Err(Error::Ingest {
            row: pos + 3, // header + 1-based + offending second row
            col: 1,
            reason: format!(
                "timestamps not strictly increasing: {:?} after {:?}",
                timestamps[pos + 1],
                timestamps[pos]
            ),
        });
    }

    let rows = timestamps.len();
    Ok(PriceSeries {
        timestamps,
        assets,
        prices: DMatrix::from_row_slice(rows, n, &values),
    })
}

/// Log increments: row `j` is `ln(price_{j+1}) − ln(price_j)` per asset, so
/// the output has one fewer row than the input.
pub fn log_increments(series: &PriceSeries) -> Result<DataMatrix> {
    let rows = series.prices.nrows();
    if rows < 3 {
        return Err(Error::InsufficientData {
            need: 3,
            got: rows,
        });
    }
    let n = series.prices.ncols();
    let mut out = DMatrix::zeros(rows - 1, n);
    for r in 0..rows - 1 {
        for c in 0..n {
            out[(r, c)] = series.prices[(r + 1, c)].ln() - series.prices[(r, c)].ln();
        }
    }
    DataMatrix::new(out)
}
