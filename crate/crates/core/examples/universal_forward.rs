//! One parameter set applied to grids of different sizes without any
//! change to the parameters, for both pooling schemes.
//!
//! `cargo run --example universal_forward`

use ugcn::caseio::bundled_graph;
use ugcn::linalg::{ComplexMatrix, C64};
use ugcn::model::{model_forward, GraphContext, LayerConfig, Pooling, UgcnParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for pooling in [Pooling::Custom, Pooling::Learnable] {
        let cfg = LayerConfig {
            pooling,
            ..LayerConfig::forecast()
        };
        let params = UgcnParams::init(&cfg, 1);
        let sum = params.checksum();
        println!("{pooling:?} pooling, {} real parameters, checksum {sum:08x}", params.n_real());
        for case in ["ieee33", "ieee69", "ieee30", "ieee39", "ieee57"] {
            let g = bundled_graph(case)?;
            let ctx = GraphContext::new(&g, true)?;
            let n = g.n();
            let window: Vec<ComplexMatrix> = (0..cfg.window_len())
                .map(|tau| ComplexMatrix::from_fn(n, cfg.input_width(), |i, j| C64::new(1.0 - 0.01 * (i + j + tau) as f64, 0.01)))
                .collect();
            let y = model_forward(&ctx, &window, &params, &cfg, n)?;
            let h1 = y.phasors(1);
            println!("  {case}: output {}x{}, bus 0 at H=1 {:.4}", y.values.rows, y.values.cols, h1[0]);
        }
        assert_eq!(params.checksum(), sum);
    }
    Ok(())
}
