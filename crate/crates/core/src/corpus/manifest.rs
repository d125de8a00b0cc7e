use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::CorpusError;

pub const MANIFEST_HEADER: [&str; 4] = ["subject_id", "image_path", "landmark_path", "expression_tag"];

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FaceRecord {
    pub subject_id: String,
    pub image_path: String,
    pub landmark_path: String,
    pub expression_tag: Option<String>,
}

impl FaceRecord {
    /// Identifier used in score matrices: `subject/file-name`.
    pub fn display_id(&self) -> String {
        let name = Path::new(&self.image_path)
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.image_path.clone());
        format!("{}/{}", self.subject_id, name)
    }
}

/// An ordered list of face records. Relative paths resolve against
/// `base_dir` (the manifest's directory).
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub records: Vec<FaceRecord>,
    pub shuffle_seed: u64,
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn new(records: Vec<FaceRecord>, base_dir: impl Into<PathBuf>) -> Result<Self, CorpusError> {
        if records.is_empty() {
            return Err(CorpusError::EmptyManifest);
        }
        let mut seen = HashSet::new();
        for r in &records {
            if r.subject_id.trim().is_empty() {
                return Err(CorpusError::EmptySubject(r.image_path.clone()));
            }
            if !seen.insert(r.image_path.as_str()) {
                return Err(CorpusError::DuplicateRecord(r.image_path.clone()));
            }
        }
        Ok(Self {
            records,
            shuffle_seed: 0,
            base_dir: base_dir.into(),
        })
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        let p = Path::new(rel);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Records grouped by subject, subjects in sorted order, records in
    /// manifest order.
    pub fn by_subject(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut map: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.records.iter().enumerate() {
            map.entry(r.subject_id.as_str()).or_default().push(i);
        }
        map
    }

    /// Checks the minimum shape for a recognition experiment: at least two
    /// subjects, each with at least two records.
    pub fn check_recognition_ready(&self) -> Result<(), CorpusError> {
        let groups = self.by_subject();
        if groups.len() < 2 {
            return Err(CorpusError::TooFewSubjects(groups.len()));
        }
        if let Some((s, _)) = groups.iter().find(|(_, v)| v.len() < 2) {
            return Err(CorpusError::TooFewRecords(s.to_string()));
        }
        Ok(())
    }

    /// Deterministic permutation of the records for a given seed.
    pub fn shuffled(&self, seed: u64) -> Manifest {
        let mut records = self.records.clone();
        records.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Manifest {
            records,
            shuffle_seed: seed,
            base_dir: self.base_dir.clone(),
        }
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        ErrorKind::NotFound => CorpusError::FileNotFound(path.to_path_buf()),
        _ => CorpusError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_manifest(&text, base)
}

pub fn parse_manifest(text: &str, base_dir: impl Into<PathBuf>) -> Result<Manifest, CorpusError> {
    if text.trim().is_empty() {
        return Err(CorpusError::EmptyManifest);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.iter().ne(MANIFEST_HEADER.iter().copied()) {
        return Err(CorpusError::BadHeader(header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_err)?;
        let field = |i: usize| row.get(i).unwrap_or("").to_string();
        let tag = field(3);
        records.push(FaceRecord {
            subject_id: field(0),
            image_path: field(1),
            landmark_path: field(2),
            expression_tag: (!tag.is_empty()).then_some(tag),
        });
    }
    Manifest::new(records, base_dir)
}

fn csv_err(e: csv::Error) -> CorpusError {
    CorpusError::Csv(e.to_string())
}

pub fn format_manifest(m: &Manifest) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(MANIFEST_HEADER).expect("in-memory write");
    for r in &m.records {
        w.write_record([
            r.subject_id.as_str(),
            r.image_path.as_str(),
            r.landmark_path.as_str(),
            r.expression_tag.as_deref().unwrap_or(""),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

#[cfg(test)]
mod tests {
    use super::*;

    const THREE: &str = "subject_id,image_path,landmark_path,expression_tag\n\
        s1,a.pgm,a.txt,neutral\n\
        s2,b.pgm,b.txt,\n\
        s1,c.pgm,c.txt,smile\n";

    #[test]
    fn parses_rows_in_file_order() {
        let m = parse_manifest(THREE, "/data").unwrap();
        assert_eq!(m.records.len(), 3);
        assert_eq!(m.records[0].image_path, "a.pgm");
        assert_eq!(m.records[1].expression_tag, None);
        assert_eq!(m.records[2].expression_tag.as_deref(), Some("smile"));
        assert_eq!(m.resolve("a.pgm"), PathBuf::from("/data/a.pgm"));
    }

    #[test]
    fn empty_and_header_only_are_empty() {
        assert!(matches!(parse_manifest("", "."), Err(CorpusError::EmptyManifest)));
        assert!(matches!(
            parse_manifest("subject_id,image_path,landmark_path,expression_tag\n", "."),
            Err(CorpusError::EmptyManifest)
        ));
    }

    #[test]
    fn duplicates_and_bad_headers_rejected() {
        let dup = format!("{THREE}s3,a.pgm,z.txt,\n");
        assert!(matches!(parse_manifest(&dup, "."), Err(CorpusError::DuplicateRecord(_))));
        assert!(matches!(
            parse_manifest("id,image,lm,tag\ns,a,b,\n", "."),
            Err(CorpusError::BadHeader(_))
        ));
    }

    #[test]
    fn shuffle_is_deterministic_permutation() {
        let text: String = std::iter::once("subject_id,image_path,landmark_path,expression_tag\n".to_string())
            .chain((0..20).map(|i| format!("s{},{i}.pgm,{i}.txt,\n", i % 4)))
            .collect();
        let m = parse_manifest(&text, ".").unwrap();
        let a = m.shuffled(7);
        let b = m.shuffled(7);
        assert_eq!(a.records, b.records);
        assert_eq!(a.shuffle_seed, 7);
        assert_ne!(a.records, m.records);
        let mut sorted_a: Vec<_> = a.records.iter().map(|r| r.image_path.clone()).collect();
        let mut sorted_m: Vec<_> = m.records.iter().map(|r| r.image_path.clone()).collect();
        sorted_a.sort();
        sorted_m.sort();
        assert_eq!(sorted_a, sorted_m);
    }

    #[test]
    fn format_round_trips() {
        let m = parse_manifest(THREE, ".").unwrap();
        assert_eq!(parse_manifest(&format_manifest(&m), ".").unwrap().records, m.records);
    }

    #[test]
    fn recognition_readiness() {
        let m = parse_manifest(THREE, ".").unwrap();
        assert!(matches!(m.check_recognition_ready(), Err(CorpusError::TooFewRecords(s)) if s == "s2"));
    }
}
