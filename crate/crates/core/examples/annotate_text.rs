//! Annotates text with a saved bundle, as JSON, standoff or CoNLL.
//! Create a bundle first, for example with the synthetic_pipeline example.
//!
//! cargo run --release --example annotate_text -- <bundle dir> [json|standoff|conll] [text]

use mex::scheme::TagScheme;
use mex::workbench::{annotate, load_bundle_for, OutputFormat};
use mex::SchemaDefinition;

fn main() -> mex::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let Some(dir) = args.get(1) else {
        eprintln!("usage: annotate_text <bundle dir> [json|standoff|conll] [text]");
        std::process::exit(1);
    };
    let format = args.get(2).and_then(|f| OutputFormat::parse(f)).unwrap_or(OutputFormat::Json);
    let text = args
        .get(3)
        .cloned()
        .unwrap_or_else(|| "Aufnahme wegen akuter Niereninsuffizienz. Tacrolimus 2 mg morgens.".into());

    let schema = SchemaDefinition::shipped();
    let bundle = load_bundle_for(dir, &schema)?;
    println!("bundle components: {:?}", bundle.component_names());
    let result = annotate(&bundle, &schema, &text)?;
    match format {
        OutputFormat::Conll => print!("{}", result.to_conll(TagScheme::Bioes)?),
        other => print!("{}", result.render(other)?),
    }
    Ok(())
}
