// Load long-format annotations, validate them, and write them back out.

use relstab::{validate_dataset, AnnotationSet, LabelSchema, RawRecord};

const CSV: &str = "\
task_id,item_id,annotator_id,round,label,timestamp
toxicity,post-1,ann-a,1,toxic,2024-03-01T10:00:00Z
toxicity,post-1,ann-b,1,toxic,2024-03-01T10:05:00Z
toxicity,post-2,ann-a,1,benign,2024-03-01T10:01:00Z
toxicity,post-2,ann-b,1, toxic ,2024-03-01T10:06:00Z
toxicity,post-1,ann-a,2,toxic,2024-03-15T09:00:00Z
toxicity,post-2,ann-a,2,toxic,2024-03-15T09:01:00Z
";

fn main() -> relstab::Result<()> {
    let schema = LabelSchema::nominal("toxicity", ["benign", "toxic"])?;
    let set = AnnotationSet::read_csv(CSV.as_bytes(), &schema)?;
    println!(
        "{} records, items {:?}, annotators {:?}, rounds {:?}",
        set.len(),
        set.item_ids(),
        set.annotator_ids(),
        set.rounds()
    );
    // surrounding whitespace is trimmed before matching the schema
    println!(
        "post-2 / ann-b / round 1 = {:?}",
        set.label("post-2", "ann-b", 1)
    );

    let mut jsonl = Vec::new();
    set.write_jsonl(&mut jsonl)?;
    let back = AnnotationSet::read_jsonl(&jsonl[..], &schema)?;
    assert_eq!(back.records(), set.records());

    let dup = vec![
        RawRecord::new("toxicity", "post-1", "ann-a", 1, "toxic"),
        RawRecord::new("toxicity", "post-1", "ann-a", 1, "benign"),
    ];
    match validate_dataset(dup, &schema) {
        Err(e) => println!("rejected: {} ({})", e, e.code()),
        Ok(_) => unreachable!("duplicate cells are invalid"),
    }
    Ok(())
}
