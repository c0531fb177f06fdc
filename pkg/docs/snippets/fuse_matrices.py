from ssmfusion.models import KernelParams, SnfParams
from ssmfusion.ops.core import pairwise_distance_matrix
from ssmfusion.ops.kernel import gaussian_similarity
from ssmfusion.ops.snf import snf_fuse
from ssmfusion.ops.synth import gen_clusters

# Three noisy views of the same three clusters
views = [gen_clusters(3, 100, 0.3, seed=s)[0] for s in range(3)]

# Kernel of every view, then fuse
kernel = KernelParams(kappa=0.1, beta=0.5)
ws = [gaussian_similarity(pairwise_distance_matrix(v), kernel) for v in views]
fused = snf_fuse(ws, SnfParams(kappa=0.1, T=20))
print(fused.values.shape)
