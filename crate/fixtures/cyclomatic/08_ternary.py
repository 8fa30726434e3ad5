def execute_command(video, possible_answers, question):
    frame = video.frame_from_index(0)
    return 'yes' if frame.exists('dog') else 'no'
