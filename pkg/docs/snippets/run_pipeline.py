import ssmfusion
from ssmfusion.impl.filesystem import write_dataset
from ssmfusion.ops.synth import gen_multimodal_dataset

# Write a small synthetic dataset
write_dataset(gen_multimodal_dataset(n_classes=5, per_class=4, warp_strength=0.3, seed=0), "local:///tmp/dataset")

# Load a config and point it at the dataset
config = ssmfusion.from_file("configs/FusedScatter.json")
config = config.model_copy(update={"input_dir": "local:///tmp/dataset", "output_dir": "local:///tmp/results"})

report = ssmfusion.run_pipeline(config)
print(f"MAP: {report.map:.3f}")
for label, score in report.per_class_map.items():
    print(f"{label}: {score:.3f}")
