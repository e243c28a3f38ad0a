import hypothesis

hypothesis.settings.register_profile(
    "cwseg", deadline=None, max_examples=60
)
hypothesis.settings.load_profile("cwseg")
