use std::fs;
use std::path::Path;

use super::{CaseDocument, Corpus, CounterfactualVariant, DatasetError, LabelDefinition};
use crate::jsonl::{self, JsonlError};

pub const LABELS_FILE: &str = "labels.jsonl";
pub const DOCUMENTS_FILE: &str = "documents.jsonl";
pub const VARIANTS_FILE: &str = "variants.jsonl";

fn read_part<T: serde::de::DeserializeOwned>(
    dir: &Path,
    file: &str,
) -> Result<Vec<T>, DatasetError> {
    let path = dir.join(file);
    jsonl::read_file(&path).map_err(|e| match e {
        JsonlError::Io(source) => DatasetError::Io {
            path: path.display().to_string(),
            source,
        },
        JsonlError::Malformed { line, message } => DatasetError::Malformed {
            file: file.to_string(),
            line,
            message,
        },
    })
}

/// Load and validate a corpus bundle directory.
pub fn load_corpus(dir: impl AsRef<Path>) -> Result<Corpus, DatasetError> {
    let dir = dir.as_ref();
    let labels: Vec<LabelDefinition> = read_part(dir, LABELS_FILE)?;
    let documents: Vec<CaseDocument> = read_part(dir, DOCUMENTS_FILE)?;
    let variants: Vec<CounterfactualVariant> = read_part(dir, VARIANTS_FILE)?;
    Corpus::new(labels, documents, variants)
}

/// Write the three record files into `dir`, creating it if needed.
pub fn write_corpus(corpus: &Corpus, dir: impl AsRef<Path>) -> Result<(), DatasetError> {
    let dir = dir.as_ref();
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| DatasetError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(LABELS_FILE);
    jsonl::write_file(&path, corpus.labels()).map_err(io_err(&path))?;
    let path = dir.join(DOCUMENTS_FILE);
    jsonl::write_file(&path, corpus.documents()).map_err(io_err(&path))?;
    let path = dir.join(VARIANTS_FILE);
    jsonl::write_file(&path, corpus.variants()).map_err(io_err(&path))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const LABELS: &str = r#"{"label_id":"gender","kind":"binary","values":["female","male"],"reference_value":"female","description":"defendant gender"}
{"label_id":"court","kind":"categorical","values":["urban","rural","suburban"],"reference_value":"urban","description":"court location"}
"#;
    const DOCS: &str = r#"{"doc_id":"d1","facts":"Theft of a bicycle.","true_sentence_months":6,"label_values":{"gender":"male","court":"urban"}}
{"doc_id":"d2","facts":"Fraud.","true_sentence_months":24,"label_values":{"gender":"female"}}
{"doc_id":"d3","facts":"Assault.","true_sentence_months":18.5,"label_values":{"gender":"female","court":"rural"}}
"#;
    const VARIANTS: &str = r#"{"doc_id":"d1","label_id":"gender","variant_value":"female","facts":"Theft of a bicycle (she)."}
{"doc_id":"d2","label_id":"gender","variant_value":"male","facts":"Fraud (he)."}
{"doc_id":"d3","label_id":"court","variant_value":"urban","facts":"Assault, urban court."}
{"doc_id":"d3","label_id":"court","variant_value":"suburban","facts":"Assault, suburban court."}
"#;

    fn bundle(labels: &str, docs: &str, variants: &str) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(LABELS_FILE), labels).unwrap();
        fs::write(dir.path().join(DOCUMENTS_FILE), docs).unwrap();
        fs::write(dir.path().join(VARIANTS_FILE), variants).unwrap();
        dir
    }

    #[test]
    fn loads_hand_written_bundle() {
        let dir = bundle(LABELS, DOCS, VARIANTS);
        let corpus = load_corpus(dir.path()).unwrap();
        assert_eq!(corpus.documents().len(), 3);
        assert_eq!(corpus.labels().len(), 2);
        assert_eq!(corpus.variants().len(), 4);
        assert_eq!(corpus.enumerate_variants("court").unwrap().len(), 2);
    }

    #[test]
    fn round_trips_through_disk() {
        let dir = bundle(LABELS, DOCS, VARIANTS);
        let corpus = load_corpus(dir.path()).unwrap();
        let out = tempfile::tempdir().unwrap();
        write_corpus(&corpus, out.path()).unwrap();
        assert_eq!(load_corpus(out.path()).unwrap(), corpus);
    }

    #[test]
    fn empty_documents_file() {
        let dir = bundle(LABELS, "", "");
        let err = load_corpus(dir.path()).unwrap_err();
        assert_eq!(err.to_string(), "corpus contains no documents");
    }

    #[test]
    fn malformed_record_reports_line() {
        let docs = DOCS.replacen("\"Fraud.\"", "Fraud", 1);
        let dir = bundle(LABELS, &docs, "");
        match load_corpus(dir.path()).unwrap_err() {
            DatasetError::Malformed { file, line, .. } => {
                assert_eq!(file, DOCUMENTS_FILE);
                assert_eq!(line, 2);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_doc_in_variant() {
        let variants = format!(
            "{VARIANTS}{}\n",
            r#"{"doc_id":"d9","label_id":"gender","variant_value":"male","facts":"?"}"#
        );
        let dir = bundle(LABELS, DOCS, &variants);
        let err = load_corpus(dir.path()).unwrap_err();
        assert!(matches!(err, DatasetError::Integrity(_)));
        assert!(err.to_string().contains("'d9'"), "{err}");
    }

    #[test]
    fn missing_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_corpus(dir.path()).unwrap_err(),
            DatasetError::Io { .. }
        ));
    }
}
