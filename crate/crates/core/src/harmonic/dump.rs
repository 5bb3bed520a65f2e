//! Debug dump of SO(3) coefficient blocks: a JSON manifest plus raw
//! little-endian complex128 values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Complex;

use super::wigner::so3_len;
use super::So3Coefficients;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpManifest {
    pub kind: String,
    pub bandwidth: usize,
    pub channels: usize,
    pub layout: String,
}

/// Writes `<stem>.json` and `<stem>.bin`.
pub fn write_blocks(stem: &Path, blocks: &[So3Coefficients<f64>]) -> Result<()> {
    let bandwidth = blocks.first().map_or(0, |b| b.bandwidth);
    let manifest = DumpManifest {
        kind: "so3_coefficients".into(),
        bandwidth,
        channels: blocks.len(),
        layout: "channel-major, degree blocks (2l+1)x(2l+1) row-major by (m, n), re/im f64 LE".into(),
    };
    serde_json::to_writer_pretty(File::create(stem.with_extension("json"))?, &manifest)?;
    let mut w = BufWriter::new(File::create(stem.with_extension("bin"))?);
    for b in blocks {
        for z in &b.data {
            w.write_f64::<LittleEndian>(z.re)?;
            w.write_f64::<LittleEndian>(z.im)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_blocks(stem: &Path) -> Result<Vec<So3Coefficients<f64>>> {
    let manifest: DumpManifest = serde_json::from_reader(File::open(stem.with_extension("json"))?)?;
    let mut raw = Vec::new();
    BufReader::new(File::open(stem.with_extension("bin"))?).read_to_end(&mut raw)?;
    let per = so3_len(manifest.bandwidth);
    if raw.len() != manifest.channels * per * 16 {
        return Err(Error::malformed(stem, "coefficient dump size does not match manifest"));
    }
    let mut cur = &raw[..];
    let mut out = Vec::with_capacity(manifest.channels);
    for _ in 0..manifest.channels {
        let mut data = Vec::with_capacity(per);
        for _ in 0..per {
            let re = cur.read_f64::<LittleEndian>()?;
            let im = cur.read_f64::<LittleEndian>()?;
            data.push(Complex::new(re, im));
        }
        out.push(So3Coefficients {
            bandwidth: manifest.bandwidth,
            data,
        });
    }
    Ok(out)
}
