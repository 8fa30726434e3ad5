def execute_command(video, possible_answers, question):
    """Asks the question on every frame."""
    answers = [f.simple_query(question) for f in video.frame_iterator()]
    return video.select_answer(answers, possible_answers)
