//! Writes a model to TOML, edits it and reads it back.

use affine_riccati::builtin;
use affine_riccati::model_file::{parse_model, to_toml};

fn main() -> affine_riccati::Result<()> {
    let text = to_toml(&builtin::cir_jump())?;
    println!("{text}");
    let back = parse_model(&text)?;
    assert_eq!(back, builtin::cir_jump());
    let edited = text.replace("b = [0.5]", "b = [-0.5]");
    match parse_model(&edited) {
        Ok(_) => println!("edited model accepted"),
        Err(e) => println!("edited model rejected: {e}"),
    }
    Ok(())
}
