//! Exact accuracy, WUPS at two thresholds and consensus scoring on a toy
//! taxonomy.

use kbvqa::evalkit::{exact_accuracy, vqa_consensus, wup_similarity, wups_score, TaxonomyTree};

fn main() -> kbvqa::Result<()> {
    let tax = TaxonomyTree::from_edges([
        ("animal", "entity"),
        ("dog", "animal"),
        ("cat", "animal"),
        ("puppy", "dog"),
        ("color", "entity"),
        ("red", "color"),
        ("blue", "color"),
    ])?;
    for (a, b) in [("dog", "cat"), ("puppy", "dog"), ("dog", "red")] {
        println!("wup({a}, {b}) = {:.4}", wup_similarity(&tax, a, b));
    }

    let preds = ["dog", "red", "puppy cat"];
    let truths = ["cat", "red", "dog cat"];
    println!("accuracy  {:.2}", exact_accuracy(&preds, &truths)?);
    println!("WUPS@0.9  {:.2}", wups_score(&preds, &truths, &tax, 0.9)?);
    println!("WUPS@0.0  {:.2}", wups_score(&preds, &truths, &tax, 0.0)?);

    let humans = ["two", "two", "three", "two", "2", "three", "three", "three", "three", "three"];
    println!("consensus(two) {:.3}", vqa_consensus("two", &humans)?);
    Ok(())
}
