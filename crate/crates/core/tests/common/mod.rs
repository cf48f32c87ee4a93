#![allow(dead_code)]

use raat::bench::{
    build_benchmark, generate_synthetic, BenchmarkSet, BenchmarkSources, DatasetTag, QueryRecord, SplitSizes,
};

pub fn synth_set(n_queries: usize, n_entities: usize, seed: u64, sizes: SplitSizes) -> BenchmarkSet {
    let records = generate_synthetic(n_queries, n_entities, seed);
    build_benchmark(
        BenchmarkSources {
            train_pool: records,
            test_pool: None,
        },
        sizes,
        seed,
    )
    .expect("synthetic benchmark builds")
}

pub fn sizes(train: usize, validation: usize, test: usize) -> SplitSizes {
    SplitSizes {
        train,
        validation,
        test,
    }
}

/// Synthetic records relabelled as `tag`, with ids kept distinct across tags.
pub fn tagged(n_queries: usize, seed: u64, tag: DatasetTag) -> Vec<QueryRecord> {
    generate_synthetic(n_queries, 16, seed)
        .into_iter()
        .map(|mut r| {
            let old = r.id.clone();
            r.id = format!("{}-{old}", tag.name());
            r.dataset = tag;
            for p in &mut r.passages {
                p.source_query_id = r.id.clone();
            }
            r
        })
        .collect()
}
