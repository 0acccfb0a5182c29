//! On-disk formats: PFB1 bag files and the CSV tables.
//!
//! PFB1 layout (all integers little-endian):
//!
//! ```text
//! 0   4   magic "PFB1"
//! 4   4   u32 n_patches
//! 8   4   u32 dim
//! 12  1   u8 has_coords
//! 13  .   n_patches * dim f32, row-major
//! .   .   if has_coords: n_patches * (u32 x, u32 y, u32 patch_size)
//! .   4   u32 metadata length
//! .   .   UTF-8 JSON {case_id, slide_ids, label[, coord_slides]}
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{
    CasePrediction, FeatureBag, Label, PatchCoord, PredictionKind, PredictionSet, Split, SplitAssignment,
    SurvivalRecord, Target,
};
use crate::error::{Error, Result};

pub const PFB_MAGIC: &[u8; 4] = b"PFB1";

#[derive(Serialize, Deserialize)]
struct BagMeta {
    case_id: String,
    slide_ids: Vec<String>,
    label: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coord_slides: Option<Vec<u32>>,
}

pub fn encode_bag(bag: &FeatureBag) -> Result<Vec<u8>> {
    bag.validate()?;
    let n = u32::try_from(bag.n_patches()).map_err(|_| Error::invalid("too many patches for PFB1"))?;
    let dim = u32::try_from(bag.dim()).map_err(|_| Error::invalid("feature dimension too large for PFB1"))?;
    let mut out = Vec::with_capacity(17 + bag.features.len() * 4);
    out.extend_from_slice(PFB_MAGIC);
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    out.push(bag.coords.is_some() as u8);
    for v in bag.features.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut coord_slides = None;
    if let Some(coords) = &bag.coords {
        for c in coords {
            out.extend_from_slice(&c.x.to_le_bytes());
            out.extend_from_slice(&c.y.to_le_bytes());
            out.extend_from_slice(&c.patch_size.to_le_bytes());
        }
        if coords.iter().any(|c| c.slide != 0) {
            coord_slides = Some(coords.iter().map(|c| c.slide).collect());
        }
    }
    let meta = BagMeta {
        case_id: bag.case_id.clone(),
        slide_ids: bag.slide_ids.clone(),
        label: bag.label,
        coord_slides,
    };
    let json = serde_json::to_vec(&meta)?;
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.pos as u64,
                message: format!("truncated {what}: need {n} bytes, {} left", self.buf.len() - self.pos),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode_bag(buf: &[u8]) -> Result<FeatureBag> {
    let mut cur = Cursor { buf, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != PFB_MAGIC {
        return Err(Error::Format { offset: 0, message: format!("bad magic {magic:?}, expected \"PFB1\"") });
    }
    let n = cur.u32("n_patches")? as usize;
    let dim = cur.u32("dim")? as usize;
    let flag_at = cur.pos as u64;
    let has_coords = match cur.take(1, "coords flag")?[0] {
        0 => false,
        1 => true,
        other => return Err(Error::Format { offset: flag_at, message: format!("coords flag {other}") }),
    };
    let n_floats = n
        .checked_mul(dim)
        .filter(|&c| c.checked_mul(4).is_some())
        .ok_or(Error::Format { offset: 4, message: format!("{n} x {dim} features overflow") })?;
    let raw = cur.take(n_floats * 4, "features")?;
    let values: Vec<f32> = raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
    let features = Array2::from_shape_vec((n, dim), values).map_err(|e| Error::Format {
        offset: 13,
        message: e.to_string(),
    })?;
    let coords = if has_coords {
        let raw = cur.take(n.saturating_mul(12), "coords")?;
        Some(
            raw.chunks_exact(12)
                .map(|b| PatchCoord {
                    slide: 0,
                    x: u32::from_le_bytes(b[0..4].try_into().unwrap()),
                    y: u32::from_le_bytes(b[4..8].try_into().unwrap()),
                    patch_size: u32::from_le_bytes(b[8..12].try_into().unwrap()),
                })
                .collect::<Vec<_>>(),
        )
    } else {
        None
    };
    let meta_len = cur.u32("metadata length")? as usize;
    let meta_at = cur.pos as u64;
    let meta_raw = cur.take(meta_len, "metadata")?;
    if cur.pos != buf.len() {
        return Err(Error::Format {
            offset: cur.pos as u64,
            message: format!("{} trailing bytes", buf.len() - cur.pos),
        });
    }
    let meta: BagMeta = serde_json::from_slice(meta_raw)
        .map_err(|e| Error::Format { offset: meta_at, message: format!("metadata: {e}") })?;
    let coords = match (coords, meta.coord_slides) {
        (Some(mut c), Some(slides)) => {
            if slides.len() != c.len() {
                return Err(Error::Format { offset: meta_at, message: "coord_slides length".into() });
            }
            for (pc, s) in c.iter_mut().zip(slides) {
                pc.slide = s;
            }
            Some(c)
        }
        (c, _) => c,
    };
    let bag = FeatureBag { case_id: meta.case_id, slide_ids: meta.slide_ids, features, coords, label: meta.label };
    bag.validate()?;
    Ok(bag)
}

pub fn write_bag(bag: &FeatureBag, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_bag(bag)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_bag(path: impl AsRef<Path>) -> Result<FeatureBag> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    decode_bag(&buf)
}

/// Every `*.pfb` file in `dir`, sorted by file name.
pub fn read_bag_dir(dir: impl AsRef<Path>) -> Result<Vec<FeatureBag>> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "pfb"))
        .collect();
    paths.sort();
    paths.iter().map(read_bag).collect()
}

/// `case_id,label,p_0,...` or `case_id,time_months,event,s_1,...`.
pub fn write_predictions<W: Write>(pred: &PredictionSet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    match pred.kind {
        PredictionKind::Classification { classes } => {
            let mut header = vec!["case_id".to_string(), "label".to_string()];
            header.extend((0..classes).map(|k| format!("p_{k}")));
            w.write_record(&header)?;
        }
        PredictionKind::Survival { bins } => {
            let mut header = vec!["case_id".to_string(), "time_months".to_string(), "event".to_string()];
            header.extend((1..=bins).map(|k| format!("s_{k}")));
            w.write_record(&header)?;
        }
    }
    for c in &pred.cases {
        let mut row = vec![c.case_id.clone()];
        match c.target {
            Target::Class(y) => row.push(y.to_string()),
            Target::Survival(r) => {
                row.push(r.time.to_string());
                row.push((r.event as u8).to_string());
            }
        }
        row.extend(c.scores.iter().map(|s| s.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_predictions<R: Read>(input: R) -> Result<PredictionSet> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let survival = match header.get(1).map(String::as_str) {
        Some("label") => false,
        Some("time_months") => true,
        _ => return Err(Error::invalid(format!("unrecognised predictions header {header:?}"))),
    };
    if header[0] != "case_id" || (survival && header.get(2).map(String::as_str) != Some("event")) {
        return Err(Error::invalid(format!("unrecognised predictions header {header:?}")));
    }
    let first_score = if survival { 3 } else { 2 };
    let width = header.len() - first_score;
    let float = |s: &str, line: u64| -> Result<f64> {
        s.trim().parse::<f64>().map_err(|_| Error::invalid(format!("line {line}: bad number {s:?}")))
    };
    let mut cases = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != header.len() {
            return Err(Error::invalid(format!("line {line}: expected {} fields", header.len())));
        }
        let target = if survival {
            let time = float(&rec[1], line)?;
            let event = match rec[2].trim() {
                "1" | "true" => true,
                "0" | "false" => false,
                other => return Err(Error::invalid(format!("line {line}: bad event flag {other:?}"))),
            };
            Target::Survival(SurvivalRecord::new(time, event)?)
        } else {
            Target::Class(
                rec[1].trim().parse().map_err(|_| Error::invalid(format!("line {line}: bad label {:?}", &rec[1])))?,
            )
        };
        let scores = (first_score..rec.len()).map(|i| float(&rec[i], line)).collect::<Result<Vec<_>>>()?;
        cases.push(CasePrediction { case_id: rec[0].to_string(), target, scores });
    }
    if survival {
        PredictionSet::survival(width, cases)
    } else {
        PredictionSet::classification(width, cases)
    }
}

pub fn read_predictions_file(path: impl AsRef<Path>) -> Result<PredictionSet> {
    read_predictions(fs::File::open(path)?)
}

pub fn write_predictions_file(pred: &PredictionSet, path: impl AsRef<Path>) -> Result<()> {
    write_predictions(pred, fs::File::create(path)?)
}

/// `case_id,split`.
pub fn write_split<W: Write>(split: &SplitAssignment, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["case_id", "split"])?;
    for (case, s) in &split.assignment {
        w.write_record([case.as_str(), &s.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_split<R: Read>(input: R) -> Result<SplitAssignment> {
    let mut r = csv::Reader::from_reader(input);
    let mut split = SplitAssignment::default();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::invalid("split rows need case_id,split"));
        }
        split.assignment.insert(rec[0].to_string(), rec[1].parse::<Split>()?);
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_bag() -> FeatureBag {
        let f = Array2::from_shape_fn((3, 2), |(i, j)| (i * 2 + j) as f32 * 0.5 - 1.0);
        let mut bag = FeatureBag::new("case-7", f)
            .unwrap()
            .with_label(Label::Survival(SurvivalRecord { time: 12.5, event: true }))
            .with_coords(vec![
                PatchCoord { slide: 0, x: 0, y: 0, patch_size: 256 },
                PatchCoord { slide: 1, x: 256, y: 0, patch_size: 256 },
                PatchCoord { slide: 1, x: 0, y: 256, patch_size: 256 },
            ])
            .unwrap();
        bag.slide_ids = vec!["s1".into(), "s2".into()];
        bag
    }

    #[test]
    fn round_trip() {
        let bag = sample_bag();
        let back = decode_bag(&encode_bag(&bag).unwrap()).unwrap();
        assert_eq!(back, bag);
    }

    #[test]
    fn zero_bag() {
        let bag = FeatureBag::new("z", Array2::zeros((1, 4))).unwrap();
        let back = decode_bag(&encode_bag(&bag).unwrap()).unwrap();
        assert_eq!(back.features, Array2::<f32>::zeros((1, 4)));
        assert_eq!(back.label, None);
        assert_eq!(back.coords, None);
    }

    #[test]
    fn wrong_magic() {
        let mut bytes = encode_bag(&sample_bag()).unwrap();
        bytes[3] = b'2';
        match decode_bag(&bytes) {
            Err(Error::Format { offset: 0, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn truncated_payload_reports_offset() {
        let bytes = encode_bag(&sample_bag()).unwrap();
        match decode_bag(&bytes[..20]) {
            Err(Error::Format { offset, message }) => {
                assert_eq!(offset, 13);
                assert!(message.contains("features"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dimension_overflow() {
        let mut bytes = encode_bag(&sample_bag()).unwrap();
        bytes[4..8].copy_from_slice(&u32::MAX.to_le_bytes());
        bytes[8..12].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(decode_bag(&bytes), Err(Error::Format { offset: 4, .. })));
    }

    #[test]
    fn predictions_csv_round_trip() {
        let pred = PredictionSet::from_binary_scores(&[0.25, 0.9, 0.1], &[false, true, false]).unwrap();
        let mut buf = Vec::new();
        write_predictions(&pred, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("case_id,label,p_0,p_1\n"));
        assert_eq!(read_predictions(buf.as_slice()).unwrap(), pred);

        let surv = PredictionSet::survival(
            2,
            vec![CasePrediction {
                case_id: "a".into(),
                target: Target::Survival(SurvivalRecord { time: 3.5, event: false }),
                scores: vec![0.8, 0.4],
            }],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_predictions(&surv, &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("case_id,time_months,event,s_1,s_2\n"));
        assert_eq!(read_predictions(buf.as_slice()).unwrap(), surv);
    }

    proptest! {
        #[test]
        fn bag_round_trip_is_identity(
            n in 1usize..6,
            dim in 1usize..6,
            seed in any::<u32>(),
            with_coords in any::<bool>(),
            event in any::<bool>(),
        ) {
            let mut rng = crate::rng::CounterRng::new(seed as u64, 0);
            let f = Array2::from_shape_fn((n, dim), |_| (rng.normal() * 10.0) as f32);
            let mut bag = FeatureBag::new(format!("case{seed}"), f).unwrap()
                .with_label(Label::Survival(SurvivalRecord { time: 1.0 + seed as f64, event }));
            bag.slide_ids = vec!["a".into(), "b".into()];
            if with_coords {
                let coords = (0..n).map(|i| PatchCoord {
                    slide: (i % 2) as u32, x: i as u32 * 512, y: seed, patch_size: 512,
                }).collect();
                bag = bag.with_coords(coords).unwrap();
            }
            let back = decode_bag(&encode_bag(&bag).unwrap()).unwrap();
            prop_assert_eq!(back, bag);
        }
    }
}
