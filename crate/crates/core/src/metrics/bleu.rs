use super::{check_corpus, ngram_counts};
use crate::error::Result;

/// Corpus BLEU@1..=max_n without smoothing.
///
/// Clipped n-gram matches and candidate n-gram totals are summed over the
/// corpus before the geometric mean; the brevity penalty uses, per item, the
/// reference length closest to the candidate (ties to the shorter).
pub fn bleu<T: Ord>(candidates: &[Vec<T>], references: &[Vec<Vec<T>>], max_n: usize) -> Result<Vec<f64>> {
    check_corpus(candidates, references)?;
    let mut matched = vec![0usize; max_n];
    let mut total = vec![0usize; max_n];
    let (mut cand_len, mut ref_len) = (0usize, 0usize);
    for (cand, refs) in candidates.iter().zip(references) {
        cand_len += cand.len();
        ref_len += refs
            .iter()
            .map(|r| r.len())
            .min_by_key(|&l| (l.abs_diff(cand.len()), l))
            .expect("checked non-empty");
        for n in 1..=max_n {
            let ref_counts: Vec<_> = refs.iter().map(|r| ngram_counts(r, n)).collect();
            for (gram, count) in ngram_counts(cand, n) {
                let max_ref = ref_counts.iter().map(|rc| rc.get(gram).copied().unwrap_or(0)).max().unwrap_or(0);
                matched[n - 1] += count.min(max_ref);
                total[n - 1] += count;
            }
        }
    }
    let bp = if cand_len == 0 {
        0.0
    } else if cand_len < ref_len {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    } else {
        1.0
    };
    let mut scores = Vec::with_capacity(max_n);
    let mut log_sum = 0.0;
    let mut zero = false;
    for n in 1..=max_n {
        if matched[n - 1] == 0 {
            zero = true;
        } else {
            log_sum += (matched[n - 1] as f64 / total[n - 1] as f64).ln();
        }
        scores.push(if zero { 0.0 } else { bp * (log_sum / n as f64).exp() });
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn perfect_match() {
        let c = vec![toks("a man is running fast")];
        let r = vec![vec![toks("a man is running fast")]];
        for s in bleu(&c, &r, 4).unwrap() {
            assert_eq!(s, 1.0);
        }
    }

    #[test]
    fn clipping_example() {
        let c = vec![toks("the the the the")];
        let r = vec![vec![toks("the cat")]];
        assert_eq!(bleu(&c, &r, 1).unwrap()[0], 0.25);
    }

    #[test]
    fn brevity_penalty_applies_to_short_candidates() {
        let c = vec![toks("the cat")];
        let r = vec![vec![toks("the cat sat down")]];
        let b1 = bleu(&c, &r, 1).unwrap()[0];
        assert!((b1 - (1.0f64 - 2.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn closest_reference_length() {
        let c = vec![toks("a b c")];
        let r = vec![vec![toks("a b c d e f g"), toks("a b")]];
        // closest is 2 (distance 1) → no penalty since c=3 > 2
        assert_eq!(bleu(&c, &r, 1).unwrap()[0], 1.0);
    }

    #[test]
    fn disjoint_is_zero() {
        let c = vec![toks("x y z")];
        let r = vec![vec![toks("a b c")]];
        assert_eq!(bleu(&c, &r, 4).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn errors() {
        let empty: Vec<Vec<String>> = vec![];
        assert!(bleu(&empty, &[], 4).is_err());
        assert!(bleu(&[toks("a")], &[vec![]], 4).is_err());
        assert!(bleu(&[toks("a")], &[], 4).is_err());
    }
}
