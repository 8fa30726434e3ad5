def execute_command(video, possible_answers, question):
    frame = video.frame_from_index(0)
    if frame.exists('dog') and frame.exists('cat') or frame.exists('bird'):
        return 'yes'
    return 'no'
