//! BLEU and CIDEr on a hand-made corpus, plus the JSON report.
//!
//! cargo run --example evaluate_metrics

use tslstm::metrics::{bleu, cider, evaluate_tokens};

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

fn main() -> tslstm::Result<()> {
    let b = bleu(&[toks("the the the the")], &[vec![toks("the cat")]], 1)?;
    println!("clipping: [the the the the] vs [the cat] -> B@1 = {}", b[0]);

    let items = vec![
        (
            "v1".to_string(),
            toks("a man is slicing a tomato"),
            vec![toks("a man is slicing a tomato"), toks("someone cuts a tomato")],
        ),
        (
            "v2".to_string(),
            toks("a dog is running"),
            vec![toks("a dog runs in the park"), toks("the dog is running fast")],
        ),
        ("v3".to_string(), toks("a woman is singing"), vec![toks("a girl plays the guitar")]),
    ];
    let cands: Vec<_> = items.iter().map(|i| i.1.clone()).collect();
    let refs: Vec<_> = items.iter().map(|i| i.2.clone()).collect();
    println!("BLEU@1..4 {:?}", bleu(&cands, &refs, 4)?);
    println!("CIDEr     {:.4}", cider(&cands, &refs, 4)?);

    let report = evaluate_tokens(&items)?;
    println!("\n{report}\n");
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
