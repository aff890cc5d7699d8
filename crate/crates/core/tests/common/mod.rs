#![allow(dead_code)]

use fairrank_core::{AlignmentMatrix, DocumentId, GroupSpace, Ranking, RelevanceTable, RequestId};

pub fn doc(i: usize) -> DocumentId {
    DocumentId::new(format!("d{i}")).unwrap()
}

pub fn rq(s: &str) -> RequestId {
    RequestId::new(s).unwrap()
}

pub fn groups(g: usize) -> GroupSpace {
    let names: Vec<String> = (0..g).map(|i| format!("g{i}")).collect();
    GroupSpace::new(names)
        .unwrap()
        .with_protected("g0")
        .unwrap()
}

pub fn one_hot(g: usize, k: usize) -> Vec<f64> {
    let mut row = vec![0.0; g];
    row[k] = 1.0;
    row
}

/// Alignment with document `i` hard-assigned to `members[i]`.
pub fn hard_alignment(members: &[usize], g: usize) -> AlignmentMatrix {
    let mut a = AlignmentMatrix::new(g);
    for (i, &m) in members.iter().enumerate() {
        a.insert(doc(i), one_hot(g, m)).unwrap();
    }
    a
}

pub fn ranking_of(q: &str, order: &[usize]) -> Ranking {
    Ranking::new(rq(q), order.iter().map(|&i| doc(i)).collect()).unwrap()
}

pub fn relevance_of(q: &str, grades: &[f64]) -> RelevanceTable {
    let mut rel = RelevanceTable::new();
    for (i, &y) in grades.iter().enumerate() {
        rel.insert(rq(q), doc(i), y).unwrap();
    }
    rel
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}
