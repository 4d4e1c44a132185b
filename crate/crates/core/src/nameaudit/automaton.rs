//! Byte-level Aho–Corasick automaton.
//!
//! The trie and failure links are built breadth-first; the automaton is then
//! compiled into a dense transition table over byte equivalence classes so
//! scanning costs one table lookup per input byte.

use std::collections::{BTreeMap, HashMap, VecDeque};

use super::NameAuditError;

pub type StateId = u32;
pub type PatternId = u32;

const ROOT: StateId = 0;

/// One (possibly overlapping) occurrence; `end` is exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Match {
    pub pattern: PatternId,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone)]
pub struct AcAutomaton {
    patterns: Vec<Vec<u8>>,
    goto: Vec<BTreeMap<u8, StateId>>,
    fail: Vec<StateId>,
    out_start: Vec<u32>,
    out_ids: Vec<PatternId>,
    classes: [u16; 256],
    class_count: usize,
    // premultiplied: entry = next_state * class_count
    delta: Vec<u32>,
}

impl AcAutomaton {
    /// Builds the automaton. Duplicate patterns collapse to the id of their
    /// first occurrence.
    pub fn build<P: AsRef<[u8]>>(patterns: &[P]) -> Result<Self, NameAuditError> {
        if patterns.is_empty() {
            return Err(NameAuditError::NoPatterns);
        }
        let mut unique: Vec<Vec<u8>> = Vec::new();
        let mut seen: HashMap<&[u8], ()> = HashMap::new();
        for p in patterns {
            let p = p.as_ref();
            if p.is_empty() {
                return Err(NameAuditError::EmptyPattern);
            }
            if seen.insert(p, ()).is_none() {
                unique.push(p.to_vec());
            }
        }

        let mut goto: Vec<BTreeMap<u8, StateId>> = vec![BTreeMap::new()];
        let mut own: Vec<Option<PatternId>> = vec![None];
        for (id, p) in unique.iter().enumerate() {
            let mut s = ROOT;
            for &b in p {
                s = match goto[s as usize].get(&b) {
                    Some(&n) => n,
                    None => {
                        let n = goto.len() as StateId;
                        goto.push(BTreeMap::new());
                        own.push(None);
                        goto[s as usize].insert(b, n);
                        n
                    }
                };
            }
            own[s as usize] = Some(id as PatternId);
        }

        let n = goto.len();
        let mut fail = vec![ROOT; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::new();
        for &child in goto[ROOT as usize].values() {
            fail[child as usize] = ROOT;
            queue.push_back(child);
        }
        order.push(ROOT);
        while let Some(s) = queue.pop_front() {
            order.push(s);
            let edges: Vec<(u8, StateId)> =
                goto[s as usize].iter().map(|(&b, &t)| (b, t)).collect();
            for (b, t) in edges {
                let mut f = fail[s as usize];
                let target = loop {
                    if let Some(&next) = goto[f as usize].get(&b) {
                        break next;
                    }
                    if f == ROOT {
                        break ROOT;
                    }
                    f = fail[f as usize];
                };
                fail[t as usize] = target;
                queue.push_back(t);
            }
        }

        // outputs(s) = own(s) ∪ outputs(fail(s)), filled in BFS order
        let mut outputs: Vec<Vec<PatternId>> = vec![Vec::new(); n];
        for &s in &order {
            let mut v: Vec<PatternId> = own[s as usize].into_iter().collect();
            if s != ROOT {
                v.extend_from_slice(&outputs[fail[s as usize] as usize].clone());
            }
            outputs[s as usize] = v;
        }
        let mut out_start = Vec::with_capacity(n + 1);
        let mut out_ids = Vec::new();
        for v in &outputs {
            out_start.push(out_ids.len() as u32);
            out_ids.extend_from_slice(v);
        }
        out_start.push(out_ids.len() as u32);

        let mut classes = [0u16; 256];
        let mut class_count = 1usize;
        let mut used = [false; 256];
        for p in &unique {
            for &b in p {
                used[b as usize] = true;
            }
        }
        for b in 0..256 {
            if used[b] {
                classes[b] = class_count as u16;
                class_count += 1;
            }
        }
        let mut delta = vec![0u32; n * class_count];
        for &s in &order {
            for b in 0..256usize {
                if !used[b] {
                    continue;
                }
                let c = classes[b] as usize;
                let next = match goto[s as usize].get(&(b as u8)) {
                    Some(&t) => t,
                    None if s == ROOT => ROOT,
                    None => delta[fail[s as usize] as usize * class_count + c] / class_count as u32,
                };
                delta[s as usize * class_count + c] = next * class_count as u32;
            }
        }

        Ok(AcAutomaton {
            patterns: unique,
            goto,
            fail,
            out_start,
            out_ids,
            classes,
            class_count,
            delta,
        })
    }

    pub fn pattern_count(&self) -> usize {
        self.patterns.len()
    }

    pub fn pattern(&self, id: PatternId) -> &[u8] {
        &self.patterns[id as usize]
    }

    pub fn patterns(&self) -> &[Vec<u8>] {
        &self.patterns
    }

    pub fn state_count(&self) -> usize {
        self.goto.len()
    }

    pub fn root(&self) -> StateId {
        ROOT
    }

    pub fn fail(&self, state: StateId) -> StateId {
        self.fail[state as usize]
    }

    pub fn goto(&self, state: StateId, byte: u8) -> Option<StateId> {
        self.goto[state as usize].get(&byte).copied()
    }

    pub fn children(&self, state: StateId) -> impl Iterator<Item = (u8, StateId)> + '_ {
        self.goto[state as usize].iter().map(|(&b, &s)| (b, s))
    }

    pub fn outputs(&self, state: StateId) -> &[PatternId] {
        let s = state as usize;
        &self.out_ids[self.out_start[s] as usize..self.out_start[s + 1] as usize]
    }

    /// Trie state reached by `prefix`, if it is a prefix of some pattern.
    pub fn state_for(&self, prefix: &[u8]) -> Option<StateId> {
        prefix.iter().try_fold(ROOT, |s, &b| self.goto(s, b))
    }

    /// Calls `f` for every overlapping occurrence, ordered by end offset.
    #[inline]
    pub fn for_each_match(&self, text: &[u8], mut f: impl FnMut(Match)) {
        let cc = self.class_count;
        let mut idx = 0usize;
        for (pos, &b) in text.iter().enumerate() {
            idx = self.delta[idx + self.classes[b as usize] as usize] as usize;
            let s = idx / cc;
            let (lo, hi) = (self.out_start[s], self.out_start[s + 1]);
            if lo != hi {
                for &pid in &self.out_ids[lo as usize..hi as usize] {
                    let len = self.patterns[pid as usize].len();
                    f(Match {
                        pattern: pid,
                        start: pos + 1 - len,
                        end: pos + 1,
                    });
                }
            }
        }
    }

    pub fn find_overlapping(&self, text: &[u8]) -> Vec<Match> {
        let mut v = Vec::new();
        self.for_each_match(text, |m| v.push(m));
        v
    }

    /// Occurrence count per pattern id.
    pub fn count_occurrences(&self, text: &[u8]) -> Vec<u64> {
        let mut counts = vec![0u64; self.patterns.len()];
        self.for_each_match(text, |m| counts[m.pattern as usize] += 1);
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_count(text: &[u8], p: &[u8]) -> u64 {
        if p.len() > text.len() {
            return 0;
        }
        text.windows(p.len()).filter(|w| *w == p).count() as u64
    }

    #[test]
    fn textbook_he_she_his_hers() {
        let ac = AcAutomaton::build(&["he", "she", "his", "hers"]).unwrap();
        assert_eq!(ac.state_count(), 10);
        let she = ac.state_for(b"she").unwrap();
        let mut outs: Vec<&[u8]> = ac.outputs(she).iter().map(|&p| ac.pattern(p)).collect();
        outs.sort();
        assert_eq!(outs, [b"he".as_slice(), b"she"]);
        assert_eq!(ac.outputs(ac.state_for(b"hers").unwrap()), &[3]);
        assert_eq!(ac.outputs(ac.state_for(b"his").unwrap()), &[2]);
        assert_eq!(ac.fail(ac.state_for(b"she").unwrap()), ac.state_for(b"he").unwrap());
        assert_eq!(ac.fail(ac.state_for(b"sh").unwrap()), ac.state_for(b"h").unwrap());
        for (_, child) in ac.children(ac.root()) {
            assert_eq!(ac.fail(child), ac.root());
        }
    }

    #[test]
    fn ushers_counts() {
        let pats = ["he", "she", "his", "hers"];
        let ac = AcAutomaton::build(&pats).unwrap();
        let counts = ac.count_occurrences(b"ushers");
        assert_eq!(counts, vec![1, 1, 0, 1]);
        for (i, p) in pats.iter().enumerate() {
            assert_eq!(counts[i], naive_count(b"ushers", p.as_bytes()));
        }
    }

    #[test]
    fn single_pattern_degenerate_trie() {
        let ac = AcAutomaton::build(&["ann"]).unwrap();
        assert_eq!(ac.state_count(), 4);
        let a = ac.state_for(b"a").unwrap();
        let an = ac.state_for(b"an").unwrap();
        let ann = ac.state_for(b"ann").unwrap();
        assert_eq!(ac.fail(a), ac.root());
        assert_eq!(ac.fail(an), ac.root());
        assert_eq!(ac.fail(ann), ac.root());
        assert_eq!(ac.count_occurrences(b"annann ann")[0], 3);
    }

    #[test]
    fn duplicates_collapse() {
        let ac = AcAutomaton::build(&["x", "y", "x"]).unwrap();
        assert_eq!(ac.pattern_count(), 2);
        assert_eq!(ac.count_occurrences(b"xx"), vec![2, 0]);
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(matches!(
            AcAutomaton::build::<&str>(&[]),
            Err(NameAuditError::NoPatterns)
        ));
        assert!(matches!(
            AcAutomaton::build(&["a", ""]),
            Err(NameAuditError::EmptyPattern)
        ));
    }

    #[test]
    fn match_offsets() {
        let ac = AcAutomaton::build(&["ab", "b"]).unwrap();
        let ms = ac.find_overlapping(b"xab");
        assert_eq!(
            ms,
            vec![
                Match { pattern: 0, start: 1, end: 3 },
                Match { pattern: 1, start: 2, end: 3 }
            ]
        );
    }

    #[test]
    fn output_invariant_holds_everywhere() {
        let ac = AcAutomaton::build(&["a", "ab", "bab", "bc", "bca", "c", "caa"]).unwrap();
        for s in 0..ac.state_count() as StateId {
            let mut expected: Vec<PatternId> = Vec::new();
            // patterns that are suffixes of the string spelled by s
            let spelled = spell(&ac, s);
            for (id, p) in ac.patterns().iter().enumerate() {
                if spelled.ends_with(p) {
                    expected.push(id as PatternId);
                }
            }
            let mut got = ac.outputs(s).to_vec();
            got.sort();
            assert_eq!(got, expected, "state {s}");
        }
    }

    fn spell(ac: &AcAutomaton, target: StateId) -> Vec<u8> {
        let mut stack = vec![(ac.root(), Vec::new())];
        while let Some((s, path)) = stack.pop() {
            if s == target {
                return path;
            }
            for (b, c) in ac.children(s) {
                let mut p = path.clone();
                p.push(b);
                stack.push((c, p));
            }
        }
        unreachable!()
    }
}
