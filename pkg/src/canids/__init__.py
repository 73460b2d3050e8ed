"""CAN-bus intrusion detection toolkit.

Submodules:
    frames    -- CAN frame model and on-disk traffic formats
    traffic   -- synthetic normal traffic and attack injection
    pipeline  -- preprocessing: features, scaling, encoding, SMOTE, splits
    models    -- the classifier suite (from scratch) behind one interface
    metrics   -- confusion matrix, PRF, ROC-AUC, cross-validation
    report    -- evaluation report document, CSV exports
    plots     -- matplotlib figure rendering for reports
    monitor   -- streaming online detector
    cli       -- command-line front end
"""

__version__ = "0.1.0"

from .frames import CanFrame, ClassLabel  # noqa: F401
