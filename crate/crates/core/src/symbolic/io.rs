use std::io::{Read, Write};

use super::orbits::{format_word, parse_word, PeriodicOrbit};
use crate::error::{Error, Result};
use crate::fmt::sig12;

fn homology_string(h: &[i64]) -> String {
    h.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// Writes orbits as CSV with columns `word, length, weight, homology`.
/// Homology components are `;`-separated.
pub fn write_orbits_csv<W: Write>(out: W, orbits: &[PeriodicOrbit]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["word", "length", "weight", "homology"])?;
    for o in orbits {
        w.write_record([format_word(&o.word), sig12(o.length), sig12(o.weight), homology_string(&o.homology)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_orbits_csv<R: Read>(input: R) -> Result<Vec<PeriodicOrbit>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).ok_or_else(|| Error::InvalidInput(format!("missing column {i}")));
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::InvalidInput(format!("bad number {s:?}")));
        let homology = field(3)?;
        out.push(PeriodicOrbit {
            word: parse_word(field(0)?)?,
            length: num(field(1)?)?,
            weight: num(field(2)?)?,
            homology: if homology.is_empty() {
                Vec::new()
            } else {
                homology
                    .split(';')
                    .map(|s| s.parse().map_err(|_| Error::InvalidInput(format!("bad label {s:?}"))))
                    .collect::<Result<_>>()?
            },
        });
    }
    Ok(out)
}
