//! Point-file reading and writing.
//!
//! CSV layout: header `image_id,x,y,class_id` optionally followed by either a
//! single `confidence` column or `conf_bg,conf_1,...,conf_T`. The JSON form is
//! an array of record objects with the same field names (`confidences` holds
//! the per-class vector, background first).

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use pointmatch_core::{LabeledPoint, PredictedPoint};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub image_id: String,
    pub x: f64,
    pub y: f64,
    pub class_id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidences: Option<Vec<f64>>,
}

impl PointRecord {
    pub fn labeled(image_id: impl Into<String>, p: &LabeledPoint) -> Self {
        Self {
            image_id: image_id.into(),
            x: p.x,
            y: p.y,
            class_id: p.class_id,
            confidence: None,
            confidences: None,
        }
    }

    pub fn point(&self) -> LabeledPoint {
        LabeledPoint::new(self.x, self.y, self.class_id)
    }
}

/// Which optional confidence columns a file carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Plain,
    Single,
    PerClass(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Csv,
    Json,
}

impl FileFormat {
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => FileFormat::Json,
            _ => FileFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointFile {
    pub records: Vec<PointRecord>,
}

const BASE_COLUMNS: [&str; 4] = ["image_id", "x", "y", "class_id"];

fn parse_err(line: u64, message: impl Into<String>) -> CliError {
    CliError::Parse {
        file: None,
        line: Some(line),
        message: message.into(),
    }
}

impl PointFile {
    pub fn new(records: Vec<PointRecord>) -> Self {
        Self { records }
    }

    pub fn layout(&self) -> Layout {
        if let Some(t) = self.records.iter().find_map(|r| r.confidences.as_ref().map(|c| c.len() - 1)) {
            Layout::PerClass(t)
        } else if self.records.iter().any(|r| r.confidence.is_some()) {
            Layout::Single
        } else {
            Layout::Plain
        }
    }

    pub fn parse(bytes: &[u8], format: FileFormat) -> Result<Self, CliError> {
        let file = match format {
            FileFormat::Csv => Self::parse_csv(bytes)?,
            FileFormat::Json => Self::parse_json(bytes)?,
        };
        Ok(file)
    }

    pub fn parse_csv(bytes: &[u8]) -> Result<Self, CliError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
        let header = reader
            .headers()
            .map_err(|e| parse_err(1, format!("unreadable header: {e}")))?
            .clone();
        let names: Vec<&str> = header.iter().map(str::trim).collect();
        if names.len() < 4 || names[..4] != BASE_COLUMNS {
            return Err(parse_err(1, format!("header must start with {}", BASE_COLUMNS.join(","))));
        }
        let layout = match &names[4..] {
            [] => Layout::Plain,
            ["confidence"] => Layout::Single,
            [bg, rest @ ..] if *bg == "conf_bg" && !rest.is_empty() => {
                for (t, name) in rest.iter().enumerate() {
                    if *name != format!("conf_{}", t + 1) {
                        return Err(parse_err(1, format!("expected column conf_{}, found {name}", t + 1)));
                    }
                }
                Layout::PerClass(rest.len())
            }
            _ => return Err(parse_err(1, "unrecognized confidence columns")),
        };

        let mut records = Vec::new();
        for row in reader.records() {
            let row = row.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                parse_err(line, e.to_string())
            })?;
            let line = row.position().map_or(0, |p| p.line());
            if row.len() != names.len() {
                return Err(parse_err(line, format!("expected {} fields, found {}", names.len(), row.len())));
            }
            let num = |idx: usize| -> Result<f64, CliError> {
                let field = row[idx].trim();
                let v: f64 = field
                    .parse()
                    .map_err(|_| parse_err(line, format!("{}: invalid number {field:?}", names[idx])))?;
                if !v.is_finite() {
                    return Err(parse_err(line, format!("{} must be finite", names[idx])));
                }
                Ok(v)
            };
            let class_field = row[3].trim();
            let class_id: i64 = class_field
                .parse()
                .map_err(|_| parse_err(line, format!("class_id: invalid integer {class_field:?}")))?;
            let confidence = match layout {
                Layout::Single => Some(num(4)?),
                _ => None,
            };
            let confidences = match layout {
                Layout::PerClass(t) => Some((4..5 + t).map(num).collect::<Result<Vec<_>, _>>()?),
                _ => None,
            };
            let image_id = row[0].trim().to_string();
            let record = checked(image_id, num(1)?, num(2)?, class_id, confidence, confidences)
                .map_err(|m| parse_err(line, m))?;
            records.push(record);
        }
        Ok(Self { records })
    }

    pub fn parse_json(bytes: &[u8]) -> Result<Self, CliError> {
        #[derive(Deserialize)]
        struct Raw {
            image_id: String,
            x: f64,
            y: f64,
            class_id: i64,
            #[serde(default)]
            confidence: Option<f64>,
            #[serde(default)]
            confidences: Option<Vec<f64>>,
        }
        let raw: Vec<Raw> = serde_json::from_slice(bytes).map_err(|e| parse_err(e.line() as u64, e.to_string()))?;
        let mut records = Vec::with_capacity(raw.len());
        let mut width = None;
        for (k, r) in raw.into_iter().enumerate() {
            let at = |m: String| CliError::parse(format!("record {k}: {m}"));
            if let Some(c) = &r.confidences {
                if *width.get_or_insert(c.len()) != c.len() {
                    return Err(at("confidences length differs from earlier records".into()));
                }
            }
            records.push(checked(r.image_id, r.x, r.y, r.class_id, r.confidence, r.confidences).map_err(at)?);
        }
        Ok(Self { records })
    }

    pub fn read(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = if path == Path::new("-") {
            let mut buf = Vec::new();
            std::io::stdin().read_to_end(&mut buf).map_err(|e| CliError::io(path, e))?;
            buf
        } else {
            std::fs::read(path).map_err(|e| CliError::io(path, e))?
        };
        let file = Self::parse(&bytes, FileFormat::for_path(path)).map_err(|e| e.in_file(path))?;
        Ok((file, bytes))
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let layout = self.layout();
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let mut header: Vec<String> = BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
        match layout {
            Layout::Plain => {}
            Layout::Single => header.push("confidence".into()),
            Layout::PerClass(t) => {
                header.push("conf_bg".into());
                header.extend((1..=t).map(|k| format!("conf_{k}")));
            }
        }
        writer.write_record(&header).expect("in-memory write");
        for r in &self.records {
            let mut row = vec![r.image_id.clone(), r.x.to_string(), r.y.to_string(), r.class_id.to_string()];
            match layout {
                Layout::Plain => {}
                Layout::Single => row.push(r.confidence.unwrap_or(1.0).to_string()),
                Layout::PerClass(_) => {
                    let c = r.confidences.as_ref().expect("per-class layout has vectors on every record");
                    row.extend(c.iter().map(f64::to_string));
                }
            }
            writer.write_record(&row).expect("in-memory write");
        }
        writer.into_inner().expect("in-memory flush")
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(&self.records).expect("records serialize");
        out.push(b'\n');
        out
    }

    pub fn encode(&self, format: FileFormat) -> Vec<u8> {
        match format {
            FileFormat::Csv => self.to_csv(),
            FileFormat::Json => self.to_json(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let bytes = self.encode(FileFormat::for_path(path));
        let mut f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
        f.write_all(&bytes).map_err(|e| CliError::io(path, e))
    }

    /// Image ids in order of first appearance.
    pub fn image_ids(&self) -> Vec<String> {
        let mut seen = HashMap::new();
        let mut ids = Vec::new();
        for r in &self.records {
            if seen.insert(r.image_id.as_str(), ()).is_none() {
                ids.push(r.image_id.clone());
            }
        }
        ids
    }

    /// Records grouped by image, images in order of first appearance.
    pub fn by_image(&self) -> Vec<(String, Vec<&PointRecord>)> {
        let ids = self.image_ids();
        let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(k, id)| (id.as_str(), k)).collect();
        let mut groups: Vec<Vec<&PointRecord>> = vec![Vec::new(); ids.len()];
        for r in &self.records {
            groups[index[r.image_id.as_str()]].push(r);
        }
        ids.into_iter().zip(groups).collect()
    }

    pub fn labeled_by_image(&self) -> Vec<(String, Vec<LabeledPoint>)> {
        self.by_image()
            .into_iter()
            .map(|(id, rs)| (id, rs.into_iter().map(PointRecord::point).collect()))
            .collect()
    }

    /// Predictions with full confidence vectors. A single confidence `c` is
    /// read as a one-class vector `[1 - c, c]`.
    pub fn predicted_by_image(&self) -> Result<Vec<(String, Vec<PredictedPoint>)>, CliError> {
        self.by_image()
            .into_iter()
            .map(|(id, rs)| {
                let pts = rs
                    .into_iter()
                    .map(|r| match (&r.confidences, r.confidence) {
                        (Some(c), _) => Ok(PredictedPoint::new(r.x, r.y, c.clone())),
                        (None, Some(c)) => Ok(PredictedPoint::new(r.x, r.y, vec![1.0 - c, c])),
                        (None, None) => Err(CliError::parse(
                            "prediction file needs confidence columns for matching",
                        )),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((id, pts))
            })
            .collect()
    }
}

fn checked(
    image_id: String,
    x: f64,
    y: f64,
    class_id: i64,
    confidence: Option<f64>,
    confidences: Option<Vec<f64>>,
) -> Result<PointRecord, String> {
    if image_id.is_empty() {
        return Err("image_id must not be empty".into());
    }
    if !x.is_finite() || !y.is_finite() {
        return Err("coordinates must be finite".into());
    }
    if class_id < 1 {
        return Err("class_id must be ≥ 1".into());
    }
    let class_id = u32::try_from(class_id).map_err(|_| format!("class_id {class_id} out of range"))?;
    let unit = |c: f64| c.is_finite() && (0.0..=1.0).contains(&c);
    if let Some(c) = confidence {
        if !unit(c) {
            return Err(format!("confidence {c} outside [0, 1]"));
        }
    }
    if let Some(cs) = &confidences {
        if cs.len() < 2 {
            return Err("confidences need background plus at least one class".into());
        }
        if let Some(c) = cs.iter().find(|c| !unit(**c)) {
            return Err(format!("confidence {c} outside [0, 1]"));
        }
    }
    Ok(PointRecord {
        image_id,
        x,
        y,
        class_id,
        confidence,
        confidences,
    })
}
