def execute_command(video, possible_answers, question):
    frame = video.frame_from_index(0)
    if frame.exists('dog'):
        return 'yes'
    return 'no'
