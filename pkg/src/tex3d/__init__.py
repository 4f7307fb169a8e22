"""Per-face texture synthesis on arbitrary triangle meshes.

Faces become nodes of a geometric graph; a pooling hierarchy over that graph
feeds a style-modulated sparse-attention generator that outputs one RGB color
per face, trained adversarially against flat-shaded renders.
"""

from .mesh import FaceGraph, MeshError, TriMesh, build_face_graph, compute_face_features, load_obj
from .generator import GeneratorConfig, forward, init_weights, prepare_mesh
from .pooling import PoolingHierarchy, PoolingLevel, build_hierarchy
from .train import TrainConfig

__version__ = "0.1.0"
