from gaugeflow.gauge import GaugeDescent
from gaugeflow.config import EnergyConfig, OptConfig, RunConfig, TaskConfig, WeakConfig
from gaugeflow.geometry.fields import Grid, MultiField, ScalarField, VectorField
from gaugeflow.geometry.lieflow import GeneratorBasis, GeneratorKind

__version__ = "0.1.0"
