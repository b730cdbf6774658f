//! Reader for externally prepared score tables. Columns: `id, prompt,
//! mos_quality, mos_correspondence, mos_authenticity, range_min, range_max`,
//! with empty cells for aspects a dataset does not annotate.

use std::io::Read;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::protocol::{AspectScores, MosRange, MosRecord};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Row {
    id: String,
    prompt: String,
    mos_quality: Option<f64>,
    mos_correspondence: Option<f64>,
    mos_authenticity: Option<f64>,
    range_min: f64,
    range_max: f64,
}

pub fn read_adapter_csv<R: Read>(reader: R) -> Result<Vec<MosRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (line, row) in rdr.deserialize::<Row>().enumerate() {
        let row = row?;
        let record = MosRecord {
            id: row.id,
            prompt: row.prompt,
            mos: AspectScores {
                quality: row.mos_quality,
                correspondence: row.mos_correspondence,
                authenticity: row.mos_authenticity,
            },
            range: MosRange::new(row.range_min, row.range_max)?,
        };
        record
            .validate()
            .map_err(|e| Error::Manifest(format!("row {} ('{}'): {e}", line + 1, record.id)))?;
        out.push(record);
    }
    Ok(out)
}
