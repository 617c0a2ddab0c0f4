use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, Writer};

use crate::error::{Error, Result};
use crate::eval::{CoordinateKind, Frame, GroundTruth, PrCurve, Projection, Traverse};
use crate::seqsearch::MatchResult;

pub const TRAVERSE_HEADER: [&str; 4] = ["frame_id", "timestamp", "lat_or_x", "lon_or_y"];
pub const GROUND_TRUTH_HEADER: [&str; 2] = ["query_index", "reference_index"];
pub const MATCH_HEADER: [&str; 4] = ["query_index", "best_reference", "seq_cost", "uniqueness"];
pub const PR_HEADER: [&str; 4] = ["threshold", "precision", "recall", "f1"];
pub const SWEEP_HEADER: [&str; 3] = ["seq_len_m", "seq_len_frames", "max_f1"];
pub const SEGMENT_HEADER: [&str; 3] = ["side", "start", "end"];

fn csv_writer(path: &Path) -> Result<Writer<File>> {
    Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

fn finish(path: &Path, mut w: Writer<File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Iterates data records with their 1-based line numbers, checking the header.
fn read_records(path: &Path, header: &[&str]) -> Result<Vec<(u64, StringRecord)>> {
    let mut rdr = ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let found = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if found.iter().collect::<Vec<_>>() != header {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                header.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        out.push((line, rec));
    }
    Ok(out)
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    line: u64,
    rec: &StringRecord,
    idx: usize,
    name: &str,
) -> Result<T> {
    rec[idx].parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("invalid {name} {:?}", &rec[idx]),
    })
}

fn parse_opt<T: std::str::FromStr>(
    path: &Path,
    line: u64,
    rec: &StringRecord,
    idx: usize,
    name: &str,
) -> Result<Option<T>> {
    if rec[idx].is_empty() {
        Ok(None)
    } else {
        parse_field(path, line, rec, idx, name).map(Some)
    }
}

pub fn write_traverse(path: impl AsRef<Path>, traverse: &Traverse) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(TRAVERSE_HEADER)
        .map_err(|e| csv_error(path, e))?;
    for f in traverse.frames() {
        w.write_record([
            f.id.clone(),
            f.timestamp.to_string(),
            f.position[0].to_string(),
            f.position[1].to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

/// Reads `frame_id,timestamp,lat_or_x,lon_or_y`; the coordinate kind is not
/// stored in the file.
pub fn read_traverse(path: impl AsRef<Path>, kind: CoordinateKind) -> Result<Traverse> {
    let path = path.as_ref();
    let mut frames: Vec<Frame> = Vec::new();
    for (line, rec) in read_records(path, &TRAVERSE_HEADER)? {
        let frame = Frame {
            id: rec[0].to_string(),
            timestamp: parse_field(path, line, &rec, 1, "timestamp")?,
            position: [
                parse_field(path, line, &rec, 2, "coordinate")?,
                parse_field(path, line, &rec, 3, "coordinate")?,
            ],
        };
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        if !frame.timestamp.is_finite() || !frame.position.iter().all(|v| v.is_finite()) {
            return Err(bad("non-finite value".into()));
        }
        if let Some(prev) = frames.last() {
            if frame.timestamp < prev.timestamp {
                return Err(bad(format!(
                    "timestamp {} is earlier than the previous frame's {}",
                    frame.timestamp, prev.timestamp
                )));
            }
        }
        frames.push(frame);
    }
    Traverse::new(frames, kind)
}

pub fn write_ground_truth(path: impl AsRef<Path>, gt: &GroundTruth) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(GROUND_TRUTH_HEADER)
        .map_err(|e| csv_error(path, e))?;
    for (q, r) in gt.mapping().iter().enumerate() {
        w.write_record([q.to_string(), fmt_opt(*r)])
            .map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

/// Reads `query_index,reference_index` rows in query order; an empty
/// reference index marks an unmatched query. The reference size is taken to
/// be one past the largest index unless `reference_count` is given.
pub fn read_ground_truth(
    path: impl AsRef<Path>,
    reference_count: Option<usize>,
) -> Result<GroundTruth> {
    let path = path.as_ref();
    let mut mapping = Vec::new();
    for (line, rec) in read_records(path, &GROUND_TRUTH_HEADER)? {
        let q: usize = parse_field(path, line, &rec, 0, "query index")?;
        if q != mapping.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected query index {}, found {q}", mapping.len()),
            });
        }
        mapping.push(parse_opt::<usize>(path, line, &rec, 1, "reference index")?);
    }
    let inferred = mapping.iter().flatten().max().map_or(0, |m| m + 1);
    GroundTruth::new(mapping, reference_count.unwrap_or(inferred))
}

pub fn write_matches(path: impl AsRef<Path>, results: &[MatchResult]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(MATCH_HEADER)
        .map_err(|e| csv_error(path, e))?;
    for r in results {
        w.write_record([
            r.query_index.to_string(),
            fmt_opt(r.best_reference),
            fmt_opt(r.seq_cost),
            fmt_opt(r.uniqueness),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

pub fn read_matches(path: impl AsRef<Path>) -> Result<Vec<MatchResult>> {
    let path = path.as_ref();
    read_records(path, &MATCH_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            Ok(MatchResult {
                query_index: parse_field(path, line, &rec, 0, "query index")?,
                best_reference: parse_opt(path, line, &rec, 1, "reference index")?,
                seq_cost: parse_opt(path, line, &rec, 2, "sequence cost")?,
                uniqueness: parse_opt(path, line, &rec, 3, "uniqueness")?,
                accepted: false,
            })
        })
        .collect()
}

pub fn write_pr_curve(path: impl AsRef<Path>, curve: &PrCurve) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(PR_HEADER).map_err(|e| csv_error(path, e))?;
    for p in &curve.points {
        w.write_record([
            p.threshold.to_string(),
            p.precision.to_string(),
            p.recall.to_string(),
            p.f1.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

/// Rows of `(seq_len_m, seq_len_frames, max_f1)`.
pub fn write_sweep(path: impl AsRef<Path>, rows: &[(f64, usize, f64)]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(SWEEP_HEADER)
        .map_err(|e| csv_error(path, e))?;
    for (m, l, f) in rows {
        w.write_record([m.to_string(), l.to_string(), f.to_string()])
            .map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

/// `index,pc1,pc2,...` with one column per projected component.
pub fn write_projection(path: impl AsRef<Path>, projection: &Projection) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    let mut header = vec!["index".to_string()];
    header.extend((1..=projection.scores.ncols()).map(|c| format!("pc{c}")));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (i, row) in projection.scores.row_iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

/// Segment boundaries for segment-scoped normalization, one list per side.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Segments {
    pub reference: Vec<Range<usize>>,
    pub query: Vec<Range<usize>>,
}

/// Reads `side,start,end` rows where `side` is `reference` or `query` and
/// `end` is exclusive.
pub fn read_segments(path: impl AsRef<Path>) -> Result<Segments> {
    let path = path.as_ref();
    let mut segs = Segments::default();
    for (line, rec) in read_records(path, &SEGMENT_HEADER)? {
        let range =
            parse_field(path, line, &rec, 1, "start")?..parse_field(path, line, &rec, 2, "end")?;
        match &rec[0] {
            "reference" => segs.reference.push(range),
            "query" => segs.query.push(range),
            other => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("side must be `reference` or `query`, found {other:?}"),
                })
            }
        }
    }
    Ok(segs)
}

pub fn write_segments(path: impl AsRef<Path>, segments: &Segments) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(SEGMENT_HEADER)
        .map_err(|e| csv_error(path, e))?;
    for (side, list) in [
        ("reference", &segments.reference),
        ("query", &segments.query),
    ] {
        for r in list {
            w.write_record([side.to_string(), r.start.to_string(), r.end.to_string()])
                .map_err(|e| csv_error(path, e))?;
        }
    }
    finish(path, w)
}

/// Writes `key = value` lines under a comment header.
pub fn write_manifest(path: impl AsRef<Path>, entries: &[(String, String)]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut body = String::from("# nsdvpr run manifest\n");
    for (k, v) in entries {
        body.push_str(&format!("{k} = {v}\n"));
    }
    w.write_all(body.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Parses a manifest written by [`write_manifest`].
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            l.split_once(" = ")
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line: i as u64 + 1,
                    message: "expected `key = value`".into(),
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_row_traverse() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        std::fs::write(
            &p,
            "frame_id,timestamp,lat_or_x,lon_or_y\na,0.5,51.7,-1.2\nb,1.0,51.8,-1.3\n",
        )
        .unwrap();
        let t = read_traverse(&p, CoordinateKind::Wgs84).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.frames()[1].id, "b");
        assert_eq!(t.frames()[1].position, [51.8, -1.3]);
    }

    #[test]
    fn decreasing_timestamps_report_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        std::fs::write(
            &p,
            "frame_id,timestamp,lat_or_x,lon_or_y\na,2,0,0\nb,3,0,0\nc,1,0,0\n",
        )
        .unwrap();
        match read_traverse(&p, CoordinateKind::PlanarM).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_row_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        std::fs::write(
            &p,
            "frame_id,timestamp,lat_or_x,lon_or_y\na,0,0,0\nb,x,0,0\n",
        )
        .unwrap();
        let err = read_traverse(&p, CoordinateKind::PlanarM).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        std::fs::write(&p, "frame_id,timestamp,lat_or_x,lon_or_y\na,0,0\n").unwrap();
        assert!(matches!(
            read_traverse(&p, CoordinateKind::PlanarM),
            Err(Error::Parse { line: 2, .. })
        ));
        std::fs::write(&p, "id,t,x,y\na,0,0,0\n").unwrap();
        assert!(matches!(
            read_traverse(&p, CoordinateKind::PlanarM),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn traverse_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let frames = vec![
            Frame {
                id: "f0".into(),
                timestamp: 0.1,
                position: [51.752_019_1, -1.257_726_9],
            },
            Frame {
                id: "f1".into(),
                timestamp: 0.1,
                position: [51.752_031_4, -1.257_702_2],
            },
            Frame {
                id: "f2".into(),
                timestamp: 1.0 / 3.0,
                position: [51.752_05, -1.257_7],
            },
        ];
        let t = Traverse::new(frames, CoordinateKind::Wgs84).unwrap();
        write_traverse(&p, &t).unwrap();
        assert_eq!(read_traverse(&p, CoordinateKind::Wgs84).unwrap(), t);
    }

    #[test]
    fn match_and_ground_truth_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let results = vec![
            MatchResult::none(0),
            MatchResult {
                query_index: 1,
                best_reference: Some(4),
                seq_cost: Some(0.125),
                uniqueness: Some(f64::INFINITY),
                accepted: false,
            },
            MatchResult {
                query_index: 2,
                best_reference: Some(5),
                seq_cost: Some(1.0 / 3.0),
                uniqueness: None,
                accepted: false,
            },
        ];
        let p = dir.path().join("m.csv");
        write_matches(&p, &results).unwrap();
        assert_eq!(read_matches(&p).unwrap(), results);

        let gt = GroundTruth::new(vec![Some(2), None, Some(0)], 3).unwrap();
        let p = dir.path().join("gt.csv");
        write_ground_truth(&p, &gt).unwrap();
        assert_eq!(read_ground_truth(&p, None).unwrap(), gt);
    }

    #[test]
    fn segments_and_manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let segs = Segments {
            reference: vec![0..10, 10..20],
            query: vec![0..5, 5..20],
        };
        let p = dir.path().join("s.csv");
        write_segments(&p, &segs).unwrap();
        assert_eq!(read_segments(&p).unwrap(), segs);

        let entries = vec![
            ("mode".to_string(), "nsd".to_string()),
            ("seq_len_frames".to_string(), "40".to_string()),
        ];
        let p = dir.path().join("run_manifest.txt");
        write_manifest(&p, &entries).unwrap();
        assert_eq!(read_manifest(&p).unwrap(), entries);
    }
}
