"""
Train, evaluate and forecast
============================

A quick end-to-end run with a small network and few embedding epochs,
then a forecast for one user on a Friday night.
"""

from spotcast.pipeline import PipelineConfig, forecast_user, run_pipeline

cfg = PipelineConfig(model_dir="demo-out/models", report_dir="demo-out/reports",
                     embed_epochs=10, hidden="64", epochs=60, cv_folds=3)
result = run_pipeline(cfg)
print("took %.1f s" % result.seconds)

# Table II layout: precision and recall per algorithm and feature variant
print(result.report.table2_csv())
# per-community scores of the forecaster
print(result.report.table3_csv())
print("mean classification accuracy:", result.report.mca)

user = "u0000"
f = forecast_user(cfg, user, weekday=4, hour=22)
print(user, "->", f.category, "(%.2f from %s)" % (f.confidence, f.community))
