"""File formats, batch runs, sampling, instance selection and reports."""
