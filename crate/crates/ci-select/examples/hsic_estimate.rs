//! HSIC on toy data: a value that tracks the embeddings against one that
//! ignores them. The dependent pairing should score far higher.

use ci_select::embed::FixedEmbedding;
use ci_select::hsic::{cosine_kernel, hsic_class, rbf_kernel, standardize_values};
use rand::{Rng, SeedableRng};

fn main() -> ci_select::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let n = 24;

    // Embeddings on a slowly rotating circle, flattened to 2 dims.
    let embeddings: Vec<FixedEmbedding> = (0..n)
        .map(|i| {
            let theta = 0.25 * i as f64;
            FixedEmbedding {
                source_id: format!("s{i}"),
                parts: 1,
                cols: 2,
                data: vec![theta.cos(), theta.sin()],
            }
        })
        .collect();
    let refs: Vec<&FixedEmbedding> = embeddings.iter().collect();
    let k = cosine_kernel(&refs)?;

    // Dependent: the value is the angle driving the embedding.
    // Independent: fresh noise, same marginal scale.
    let dependent: Vec<f64> = (0..n).map(|i| 0.25 * i as f64).collect();
    let independent: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.25 * n as f64)).collect();

    for (tag, values) in [("dependent", &dependent), ("independent", &independent)] {
        let z = standardize_values(values)?;
        let l = rbf_kernel(&z, 0.5)?;
        println!("{tag:<12} HSIC = {:.6}", hsic_class(&k, &l)?);
    }
    Ok(())
}
