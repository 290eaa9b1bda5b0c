//! Criterion benchmarks for logchat-core; see `benches/`.
//!
//! The corpus helpers live here so every bench sees the same input.

const HDFS_SHAPES: [&str; 6] = [
    "INFO dfs.DataNode$DataXceiver: Receiving block blk_{b} src: /10.250.{x}.{y}:54106 dest: /10.250.{x}.{y}:50010",
    "INFO dfs.DataNode$PacketResponder: PacketResponder {n} for block blk_{b} terminating",
    "INFO dfs.DataNode$PacketResponder: Received block blk_{b} of size 67108864 from /10.251.{x}.{y}",
    "INFO dfs.FSNamesystem: BLOCK* NameSystem.addStoredBlock: blockMap updated: 10.251.{x}.{y}:50010 is added to blk_{b} size 67108864",
    "INFO dfs.FSNamesystem: BLOCK* NameSystem.allocateBlock: /user/root/rand/_temporary/part-{n}. blk_{b}",
    "WARN dfs.DataNode$DataXceiver: 10.251.{x}.{y}:50010:Got exception while serving blk_{b} to /10.251.{x}.{y}:",
];

/// `n` deterministic HDFS-style lines.
pub fn hdfs_corpus(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            let body = HDFS_SHAPES[(i * 7 + i / 5) % HDFS_SHAPES.len()]
                .replace("{b}", &format!("{}", 1_000_000_007u64.wrapping_mul(i as u64 + 1) % 9_999_999_999))
                .replace("{x}", &(i % 250).to_string())
                .replace("{y}", &((i * 31) % 250).to_string())
                .replace("{n}", &(i % 3).to_string());
            format!("0811{:02} {:06} {} {}", 9 + i / 100_000 % 20, 200_000 + i % 600_000, 100 + i % 900, body)
        })
        .collect()
}

/// Free-text answers for metric benchmarks.
pub fn answer_pair(words: usize) -> (String, String) {
    const VOCAB: [&str; 12] = [
        "block", "replica", "datanode", "failed", "received", "exception", "size", "the", "root", "cause", "disk",
        "network",
    ];
    let a = (0..words).map(|i| VOCAB[i % VOCAB.len()]).collect::<Vec<_>>().join(" ");
    let b = (0..words).map(|i| VOCAB[(i * 5 + 3) % VOCAB.len()]).collect::<Vec<_>>().join(" ");
    (a, b)
}
