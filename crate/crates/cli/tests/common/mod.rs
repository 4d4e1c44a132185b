#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub fn clozekit() -> Command {
    Command::new(env!("CARGO_BIN_EXE_clozekit"))
}

pub fn run(args: &[&str]) -> Output {
    clozekit().args(args).output().expect("spawn clozekit")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn assert_ok(o: &Output) {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        o.status.code(),
        stdout(o),
        String::from_utf8_lossy(&o.stderr)
    );
}

/// Lowercase nonsense words long enough that sentences never collide.
pub fn word(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(4..=9);
    (0..n).map(|_| rng.random_range(b'a'..=b'z') as char).collect()
}

pub fn sentence(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(6..=12);
    let words: Vec<String> = (0..n).map(|_| word(rng)).collect();
    let mut s = words.join(" ");
    s[..1].make_ascii_uppercase();
    s.push('.');
    s
}

pub const PLANTED: [&str; 5] = ["doc03", "doc07", "doc11", "doc12", "doc18"];
/// Unseen document with one sentence planted 99 times, one short of the threshold.
pub const NEAR_MISS: &str = "doc05";

pub struct Planted {
    pub dir: tempfile::TempDir,
    pub archive: PathBuf,
    pub training: PathBuf,
    /// Sentences of every archive document, by id.
    pub sentences: Vec<(String, Vec<String>)>,
}

fn write_jsonl(path: &Path, rows: &[serde_json::Value]) {
    let mut s = String::new();
    for r in rows {
        s.push_str(&r.to_string());
        s.push('\n');
    }
    fs::write(path, s).unwrap();
}

/// 20 archive documents of 14 sentences. Each planted document has ten
/// sentences copied into ten training records apiece (100 matches, the
/// SEEN threshold exactly); the near miss reaches 99.
pub fn planted_fixture(seed: u64) -> Planted {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dir = tempfile::tempdir().unwrap();
    let archive = dir.path().join("archive.jsonl");
    let training = dir.path().join("training");
    fs::create_dir_all(&training).unwrap();

    let mut sentences = Vec::new();
    let mut rows = Vec::new();
    for i in 0..20 {
        let id = format!("doc{i:02}");
        let s: Vec<String> = (0..14).map(|_| sentence(&mut rng)).collect();
        rows.push(json!({ "id": id, "title": format!("Item {i}"), "text": s.join(" ") }));
        sentences.push((id, s));
    }
    write_jsonl(&archive, &rows);

    let mut records = Vec::new();
    let filler = |rng: &mut ChaCha8Rng| (0..3).map(|_| sentence(rng)).collect::<Vec<_>>().join(" ");
    for (id, s) in &sentences {
        if PLANTED.contains(&id.as_str()) {
            for planted in &s[..10] {
                for _ in 0..10 {
                    records.push(format!("{} {planted} {}", filler(&mut rng), filler(&mut rng)));
                }
            }
        } else if id == NEAR_MISS {
            for _ in 0..99 {
                records.push(format!("{} {}", filler(&mut rng), s[4]));
            }
        }
    }
    for _ in 0..100 {
        records.push(filler(&mut rng));
    }
    // two shards
    let half = records.len() / 2;
    for (k, chunk) in [&records[..half], &records[half..]].iter().enumerate() {
        let rows: Vec<_> = chunk
            .iter()
            .enumerate()
            .map(|(j, t)| json!({ "id": format!("t{k}-{j}"), "text": t }))
            .collect();
        write_jsonl(&training.join(format!("shard-{k}.jsonl")), &rows);
    }
    Planted {
        dir,
        archive,
        training,
        sentences,
    }
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}
