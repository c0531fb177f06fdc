from ssmfusion.models import ScatteringParams
from ssmfusion.ops.scattering import build_filter_bank, scattering_distance, scattering_transform
from ssmfusion.ops.synth import gen_blob_image

params = ScatteringParams(J=4, L=8, input_n=256, output_n=32)
bank = build_filter_bank(params)

a = scattering_transform(gen_blob_image((0.3, 0.5), 0.1, 256), bank)
b = scattering_transform(gen_blob_image((0.35, 0.5), 0.1, 256), bank)

# 427008 coefficients per image
print(a.coefficients.size, scattering_distance(a, b))
