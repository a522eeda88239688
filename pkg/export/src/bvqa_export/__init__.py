"""One-time conversion of published ResNet-50 / VGG-16 classification
weights into portable ONNX graphs with named intermediate outputs."""

__version__ = "0.1.0"
