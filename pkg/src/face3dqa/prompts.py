"""Static question templates for prompting LLM-based evaluators.

Three questions per video: one per rating dimension plus the distortion
classification question listing the category taxonomy.
"""

QUALITY_QUESTION = (
    "Please rate the quality of the human face in this video, considering "
    "factors such as resolution, clarity, smoothness, and overall visual quality."
)

AUTHENTICITY_QUESTION = (
    "Please rate the authenticity of the human face in this video, considering "
    "factors such as natural facial movements, consistency, texture realism, and "
    "any signs of digital manipulation or artificial generation."
)

DISTORTION_QUESTION = (
    "Examine each angle within the image and identify any noticeable distortions. "
    "Choose one or more categories from the following list to classify any "
    "distortions you find: Eye Distortions, Mouth Distortions, Hair Distortions, "
    "Facial Feature Distortions, Head Structure Distortions, Overlap or Blending "
    "Issues, Blurring / Exposure / Grain, Accessories or Cloth Distortions."
)

QUESTION_TEMPLATES = {
    "quality": QUALITY_QUESTION,
    "authenticity": AUTHENTICITY_QUESTION,
    "distortion": DISTORTION_QUESTION,
}
