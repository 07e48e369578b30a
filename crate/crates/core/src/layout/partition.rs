use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::mesh::FaceConnectivity;

/// Greedy breadth-first agglomeration into blocks of at most `l` elements.
///
/// Candidates wait in an ordered queue; each step removes the candidate that
/// shares the most faces with the block under construction (earliest queued
/// wins ties). A full block reseeds from the first remaining candidate, and
/// an exhausted queue is refilled with the lowest unassigned element.
pub fn greedy_partition(conn: &FaceConnectivity, l: usize) -> Result<Vec<Vec<usize>>> {
    if l == 0 {
        return Err(Error::InvalidArgument("partition block size must be at least 1".into()));
    }
    let k = conn.face_ref.len();
    let neighbors: Vec<Vec<usize>> = (0..k)
        .map(|e| (0..4).filter_map(|f| conn.neighbor(e, f).map(|(n, _)| n)).collect())
        .collect();
    let mut assigned = vec![false; k];
    let mut block_of = vec![usize::MAX; k];
    let mut remaining = k;
    let mut lowest = 0usize;
    let mut next_lowest = |assigned: &[bool]| -> Option<usize> {
        while lowest < k && assigned[lowest] {
            lowest += 1;
        }
        (lowest < k).then_some(lowest)
    };

    let mut blocks = Vec::new();
    let mut seed = next_lowest(&assigned);
    while remaining > 0 {
        let Some(s) = seed.filter(|&s| !assigned[s]).or_else(|| next_lowest(&assigned)) else { break };
        let mut queue: VecDeque<usize> = VecDeque::from([s]);
        let mut queued = vec![false; k];
        queued[s] = true;
        let id = blocks.len();
        let mut block = Vec::new();
        seed = None;
        loop {
            // Candidate sharing the most faces with the block.
            let mut best = 0;
            let mut best_score = -1i64;
            for (qi, &c) in queue.iter().enumerate() {
                let score = neighbors[c].iter().filter(|&&n| block_of[n] == id).count() as i64;
                if score > best_score {
                    best = qi;
                    best_score = score;
                }
            }
            if let Some(e) = queue.remove(best) {
                queued[e] = false;
                if !assigned[e] {
                    assigned[e] = true;
                    block_of[e] = id;
                    remaining -= 1;
                    block.push(e);
                    if block.len() == l {
                        seed = queue.iter().copied().find(|&c| !assigned[c]);
                        break;
                    }
                    for &n in &neighbors[e] {
                        if !assigned[n] && !queued[n] {
                            queued[n] = true;
                            queue.push_back(n);
                        }
                    }
                }
            }
            if queue.is_empty() {
                match next_lowest(&assigned) {
                    None => break,
                    Some(e) => {
                        queued[e] = true;
                        queue.push_back(e);
                    }
                }
            }
        }
        blocks.push(block);
    }
    Ok(blocks)
}

/// Checks that `partition` covers `0..num_elements` exactly once with blocks
/// of at most `l` elements.
pub fn validate_partition(partition: &[Vec<usize>], num_elements: usize, l: usize) -> Result<()> {
    let mut seen = vec![false; num_elements];
    for (b, block) in partition.iter().enumerate() {
        if block.len() > l {
            return Err(Error::InvalidArgument(format!("partition block {b} has {} elements, limit {l}", block.len())));
        }
        for &e in block {
            if e >= num_elements || std::mem::replace(&mut seen[e], true) {
                return Err(Error::InvalidArgument(format!("partition block {b} lists element {e} out of range or twice")));
            }
        }
    }
    if let Some(e) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidArgument(format!("element {e} is not in any partition block")));
    }
    Ok(())
}
