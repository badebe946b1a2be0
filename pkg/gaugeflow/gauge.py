from gaugeflow.engine.descent_engine import DescentEngine


class GaugeDescent(DescentEngine):
    pass
