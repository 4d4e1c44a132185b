use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use clozekit::nameaudit::build_automaton;
use clozekit::strsearch::{bm_contains, AuditOptions, SentenceIndex, Strategy};
use clozekit_bench::ZipfText;

fn bench_bm(c: &mut Criterion) {
    let mut z = ZipfText::new(7, 5000, 1.1);
    let text = z.records(1 << 20, 1 << 20).remove(0);
    let pattern = z.sentence();
    let mut g = c.benchmark_group("bm_contains");
    g.throughput(Throughput::Bytes(text.len() as u64));
    g.bench_function("1MiB_miss", |b| {
        b.iter(|| bm_contains(black_box(text.as_bytes()), black_box(pattern.as_bytes())))
    });
    g.finish();
}

fn bench_audit(c: &mut Criterion) {
    let mut z = ZipfText::new(11, 5000, 1.1);
    let records = z.records(8 << 20, 4096);
    let bytes: usize = records.iter().map(String::len).sum();
    let query = z.query_document("q", 1000);
    let mut g = c.benchmark_group("sentence_audit");
    g.throughput(Throughput::Bytes(bytes as u64));
    g.sample_size(10);
    for strategy in [Strategy::Indexed, Strategy::Exhaustive] {
        let opts = AuditOptions {
            strategy,
            ..AuditOptions::default()
        };
        let index = SentenceIndex::build(std::slice::from_ref(&query), &opts);
        let label = format!("{strategy:?}").to_lowercase();
        if strategy == Strategy::Exhaustive {
            // the exhaustive scan is slow; time a slice of the corpus
            let slice = &records[..records.len() / 16];
            let slice_bytes: usize = slice.iter().map(String::len).sum();
            g.throughput(Throughput::Bytes(slice_bytes as u64));
            g.bench_function(BenchmarkId::new(label, "1000_sentences"), |b| {
                b.iter(|| scan(&index, slice))
            });
        } else {
            g.bench_function(BenchmarkId::new(label, "1000_sentences"), |b| {
                b.iter(|| scan(&index, &records))
            });
        }
    }
    g.finish();
}

fn scan(index: &SentenceIndex, records: &[String]) -> u64 {
    let mut counts = vec![0u64; index.doc_count()];
    let mut scratch = index.scratch();
    for r in records {
        index.scan_record(r.as_bytes(), &mut counts, &mut scratch);
    }
    counts[0]
}

fn bench_names(c: &mut Criterion) {
    let mut z = ZipfText::new(5, 20_000, 1.0);
    let text = z.records(4 << 20, 4 << 20).remove(0);
    let mut g = c.benchmark_group("name_scan");
    g.throughput(Throughput::Bytes(text.len() as u64));
    for n in [100usize, 10_000] {
        let names: Vec<String> = (0..n)
            .map(|_| {
                let first = z.word().to_string();
                format!("{first} {}", z.word())
            })
            .collect();
        let scanner = build_automaton(&names, true, false).expect("names");
        g.bench_with_input(BenchmarkId::from_parameter(n), &text, |b, t| {
            b.iter(|| scanner.count_in(black_box(t)))
        });
    }
    g.finish();
}

criterion_group!(benches, bench_bm, bench_audit, bench_names);
criterion_main!(benches);
