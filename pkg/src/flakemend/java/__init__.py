"""Java source analysis: parsing, localization, patching and manifest edits."""
