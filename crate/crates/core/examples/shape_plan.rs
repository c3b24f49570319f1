//! Print the layer-by-layer activation sizes of the VGG11 embedder.
//!
//! ```text
//! cargo run --example shape_plan -- [rows cols channels]
//! ```
//!
//! Defaults to a 128x64x3 pedestrian crop.

use msdoas::embedding::{vgg11_shape_plan, LayerKernel, ShapeSpec};

fn main() -> msdoas::Result<()> {
    let dims: Vec<usize> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("dimensions must be integers"))
        .collect();
    let input = match dims[..] {
        [] => ShapeSpec::new(128, 64, 3),
        [r, c, ch] => ShapeSpec::new(r, c, ch),
        _ => panic!("expected rows cols channels"),
    };

    println!("{:<9} {:>12} {:>12}  kernel", "layer", "input", "output");
    for layer in vgg11_shape_plan(input)? {
        let kernel = match layer.kernel {
            LayerKernel::Conv { rows, cols, depth } => format!("conv {rows}x{cols}x{depth}"),
            LayerKernel::Pool { rows, cols, depth, stride } => format!("pool {rows}x{cols}x{depth} /{stride}"),
            LayerKernel::FullyConnected { outputs } => format!("fc {outputs}"),
        };
        println!("{:<9} {:>12} {:>12}  {kernel}", layer.name, layer.input.to_string(), layer.output.to_string());
    }
    Ok(())
}
