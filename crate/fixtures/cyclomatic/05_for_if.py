def execute_command(video, possible_answers, question):
    for frame in video.frame_iterator():
        if frame.exists('dog'):
            return frame.simple_query(question)
    return 'unknown'
