// Writes a model and its reward field in the plain-text formats and reads
// them back.

use shiftspec::distributions::RngStream;
use shiftspec::models::{gen_random_model, gen_random_reward, read_model, read_reward, write_model, write_reward};

pub fn run() -> shiftspec::Result<String> {
    let mut rng = RngStream::new(1, 0);
    let model = gen_random_model(3, 2, 1.0, &mut rng)?;
    let reward = gen_random_reward(model.shape(), 1.0, 0.5, &mut rng)?;

    let mut text = Vec::new();
    write_model(&model, &mut text)?;
    let back = read_model(text.as_slice())?;
    assert_eq!(back, model);

    let mut rtext = Vec::new();
    write_reward(&reward, &mut rtext)?;
    assert_eq!(read_reward(rtext.as_slice())?, reward);

    let text = String::from_utf8(text).expect("model files are ASCII");
    print!("{text}");
    print!("{}", String::from_utf8_lossy(&rtext));
    Ok(text)
}

fn main() -> shiftspec::Result<()> {
    run().map(|_| ())
}
